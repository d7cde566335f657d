#include "gridface/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace gridface {

double tar_at_far(std::vector<double> genuine, std::vector<double> impostor, double far) {
    GF_REQUIRE(!genuine.empty() && !impostor.empty(), "tar_at_far: empty score sets");
    GF_REQUIRE(far > 0.0 && far < 1.0, "tar_at_far: far must be in (0,1)");
    if (static_cast<double>(impostor.size()) < 1.0 / far) {
        throw ContractError("tar_at_far: fewer impostor pairs than 1/FAR; refuse this level");
    }
    std::sort(genuine.begin(), genuine.end());
    std::sort(impostor.begin(), impostor.end());

    const double ng = static_cast<double>(genuine.size());
    const double ni = static_cast<double>(impostor.size());
    auto tar_at = [&](double thr) {
        // accept when distance <= thr
        return static_cast<double>(std::upper_bound(genuine.begin(), genuine.end(), thr) -
                                   genuine.begin()) / ng;
    };
    auto far_at = [&](double thr) {
        return static_cast<double>(std::upper_bound(impostor.begin(), impostor.end(), thr) -
                                   impostor.begin()) / ni;
    };

    // ROC vertices at the distinct impostor distances, plus the (0,0)
    // vertex below every score.
    double prev_far = 0.0;
    double prev_tar = tar_at(std::nextafter(impostor.front(), -1e300));
    for (size_t i = 0; i < impostor.size();) {
        size_t j = i;
        while (j < impostor.size() && impostor[j] == impostor[i]) ++j;
        double thr = impostor[i];
        double cur_far = far_at(thr);
        double cur_tar = tar_at(thr);
        if (cur_far >= far) {
            // Interpolate between the previous vertex and this one.
            double t = (far - prev_far) / (cur_far - prev_far);
            return prev_tar + t * (cur_tar - prev_tar);
        }
        prev_far = cur_far;
        prev_tar = cur_tar;
        i = j;
    }
    return 1.0;  // far above the largest achievable impostor rate
}

double point_spread(const std::vector<Point2>& points) {
    GF_REQUIRE(!points.empty(), "point_spread: empty set");
    double cx = 0, cy = 0;
    for (const auto& p : points) {
        cx += p.x;
        cy += p.y;
    }
    cx /= points.size();
    cy /= points.size();
    double acc = 0;
    for (const auto& p : points) {
        double dx = p.x - cx, dy = p.y - cy;
        acc += dx * dx + dy * dy;
    }
    return std::sqrt(acc / points.size());
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

MetricsWriter::MetricsWriter(const std::string& path) : path_(path) {
    bool append = false;
    if (std::filesystem::exists(path)) {
        std::ifstream in(path, std::ios::binary);
        std::string first;
        if (std::getline(in, first) && first == kSchema) append = true;
    }
    if (!append) {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("metrics: cannot open " + path);
        f << kSchema << "\n";
        f << "epoch,split,recog,reg,de,total,tar_far1e1,tar_far1e2\n";
    }
}

void MetricsWriter::row(uint64_t epoch, const std::string& split, double recog, double reg,
                        double de, double total, double tar_far1e1, double tar_far1e2) {
    std::ofstream f(path_, std::ios::binary | std::ios::app);
    if (!f) throw IoError("metrics: cannot append to " + path_);
    f << epoch << "," << split << "," << format_double(recog) << "," << format_double(reg) << ","
      << format_double(de) << "," << format_double(total) << ",";
    if (tar_far1e1 >= 0) f << format_double(tar_far1e1);
    f << ",";
    if (tar_far1e2 >= 0) f << format_double(tar_far1e2);
    f << "\n";
}

void MetricsWriter::check_schema(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("metrics: cannot open " + path);
    std::string first;
    std::getline(in, first);
    if (first != kSchema) throw IoError("metrics: unknown schema in " + path);
}

}  // namespace gridface
