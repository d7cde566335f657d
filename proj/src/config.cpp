#include "gridface/config.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gridface/common.hpp"

namespace gridface {

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string ExperimentConfig::serialize() const {
    std::ostringstream o;
    o << "cells = " << cells << "\n";
    o << "lambda_reg = " << fmt_double(lambda_reg) << "\n";
    o << "lambda_de = " << fmt_double(lambda_de) << "\n";
    o << "alpha = " << fmt_double(alpha) << "\n";
    o << "dae_sigma = " << fmt_double(dae_sigma) << "\n";
    o << "dae_epochs = " << dae_epochs << "\n";
    o << "dae_lr = " << fmt_double(dae_lr) << "\n";
    o << "dae_batch = " << dae_batch << "\n";
    o << "resolution = " << resolution << "\n";
    o << "identities = " << identities << "\n";
    o << "val_identities = " << val_identities << "\n";
    o << "test_identities = " << test_identities << "\n";
    o << "images_per_identity = " << images_per_identity << "\n";
    o << "train_noise = " << fmt_double(train_noise) << "\n";
    o << "projective_jitter = " << fmt_double(projective_jitter) << "\n";
    o << "batch = " << batch << "\n";
    o << "epochs = " << epochs << "\n";
    o << "steps_per_epoch = " << steps_per_epoch << "\n";
    o << "lr = " << fmt_double(lr) << "\n";
    o << "lr_decay = " << fmt_double(lr_decay) << "\n";
    o << "patience = " << patience << "\n";
    o << "seed = " << seed << "\n";
    o << "no_reg = " << (no_reg ? 1 : 0) << "\n";
    o << "sequential = " << (sequential ? 1 : 0) << "\n";
    return o.str();
}

ExperimentConfig ExperimentConfig::parse_text(const std::string& text) {
    ExperimentConfig c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        // trim
        auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        auto trim = [](std::string s) {
            auto a = s.find_first_not_of(" \t");
            auto b = s.find_last_not_of(" \t");
            if (a == std::string::npos) return std::string();
            return s.substr(a, b - a + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty()) {
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");
        }
        auto as_int = [&](int& dst) {
            char* end = nullptr;
            long v = std::strtol(val.c_str(), &end, 10);
            if (*end != '\0') throw ConfigError("config: bad integer for " + key + ": " + val);
            dst = static_cast<int>(v);
        };
        auto as_u64 = [&](uint64_t& dst) {
            char* end = nullptr;
            unsigned long long v = std::strtoull(val.c_str(), &end, 10);
            if (*end != '\0') throw ConfigError("config: bad integer for " + key + ": " + val);
            dst = v;
        };
        auto as_double = [&](double& dst) {
            char* end = nullptr;
            double v = std::strtod(val.c_str(), &end);
            if (*end != '\0') throw ConfigError("config: bad number for " + key + ": " + val);
            dst = v;
        };
        auto as_bool = [&](bool& dst) {
            if (val == "1" || val == "true") {
                dst = true;
            } else if (val == "0" || val == "false") {
                dst = false;
            } else {
                throw ConfigError("config: bad boolean for " + key + ": " + val);
            }
        };
        if (key == "cells") as_int(c.cells);
        else if (key == "lambda_reg") as_double(c.lambda_reg);
        else if (key == "lambda_de") as_double(c.lambda_de);
        else if (key == "alpha") as_double(c.alpha);
        else if (key == "dae_sigma") as_double(c.dae_sigma);
        else if (key == "dae_epochs") as_int(c.dae_epochs);
        else if (key == "dae_lr") as_double(c.dae_lr);
        else if (key == "dae_batch") as_int(c.dae_batch);
        else if (key == "resolution") as_int(c.resolution);
        else if (key == "identities") as_int(c.identities);
        else if (key == "val_identities") as_int(c.val_identities);
        else if (key == "test_identities") as_int(c.test_identities);
        else if (key == "images_per_identity") as_int(c.images_per_identity);
        else if (key == "train_noise") as_double(c.train_noise);
        else if (key == "projective_jitter") as_double(c.projective_jitter);
        else if (key == "batch") as_int(c.batch);
        else if (key == "epochs") as_int(c.epochs);
        else if (key == "steps_per_epoch") as_int(c.steps_per_epoch);
        else if (key == "lr") as_double(c.lr);
        else if (key == "lr_decay") as_double(c.lr_decay);
        else if (key == "patience") as_int(c.patience);
        else if (key == "seed") as_u64(c.seed);
        else if (key == "no_reg") as_bool(c.no_reg);
        else if (key == "sequential") as_bool(c.sequential);
        else throw ConfigError("config: unknown key: " + key);
    }
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("config: cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_text(ss.str());
}

void ExperimentConfig::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("config: cannot write " + path);
    f << serialize();
}

uint64_t ExperimentConfig::digest() const { return fnv1a64(serialize()); }

void ExperimentConfig::validate() const {
    if (cells < 0) throw ConfigError("config: cells must be >= 0");
    if (lambda_reg < 0 || lambda_de < 0 || alpha < 0) {
        throw ConfigError("config: weights must be non-negative");
    }
    if (dae_sigma <= 0) throw ConfigError("config: dae_sigma must be positive");
    if (resolution < 16 || resolution % 8 != 0) {
        throw ConfigError("config: resolution must be >= 16 and divisible by 8");
    }
    if (train_identities() < 2) {
        throw ConfigError("config: need at least 2 training identities after the split");
    }
    if (val_identities < 2 || test_identities < 2) {
        throw ConfigError("config: val/test splits need at least 2 identities each");
    }
    if (images_per_identity < 2) throw ConfigError("config: images_per_identity must be >= 2");
    if (batch < 1 || epochs < 1 || steps_per_epoch < 1) {
        throw ConfigError("config: training schedule must be positive");
    }
    if (lr <= 0 || lr_decay < 1 || patience < 1) throw ConfigError("config: bad lr schedule");
    if (train_noise < 0 || projective_jitter < 0) {
        throw ConfigError("config: noise amplitudes must be non-negative");
    }
}

}  // namespace gridface
