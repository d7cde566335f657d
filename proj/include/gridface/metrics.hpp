#pragma once

#include <string>
#include <vector>

#include "gridface/common.hpp"
#include "gridface/geometry.hpp"

namespace gridface {

// True-accept rate at a fixed false-accept rate over distance scores
// (smaller = more similar). The threshold is the impostor-distance
// empirical quantile; ties and staircase gaps are resolved by linear
// interpolation between adjacent ROC vertices, so degenerate score sets
// behave sensibly (all-equal scores give TAR == FAR). Throws ContractError
// when there are fewer impostor pairs than 1/far.
double tar_at_far(std::vector<double> genuine, std::vector<double> impostor, double far);

// Spread of a point cloud: sqrt of the mean squared distance to the
// centroid (population form).
double point_spread(const std::vector<Point2>& points);

// Append-only metrics CSV with a versioned schema line. Byte-identical
// across reruns with equal inputs.
class MetricsWriter {
public:
    static constexpr const char* kSchema = "# gridface-metrics v1";

    // Opens fresh (writes schema + header) or appends when the file already
    // has a valid schema line.
    explicit MetricsWriter(const std::string& path);

    void row(uint64_t epoch, const std::string& split, double recog, double reg, double de,
             double total, double tar_far1e1, double tar_far1e2);

    static void check_schema(const std::string& path);

private:
    std::string path_;
};

std::string format_double(double v);

}  // namespace gridface
