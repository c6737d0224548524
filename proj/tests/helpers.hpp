#pragma once

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "cxr/datamodel.hpp"
#include "cxr/random.hpp"

namespace testutil {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("cxr_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string make_id(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "rec-%07zu", i);
    return buf;
}

inline std::vector<cxr::ImageRecord> make_records(std::size_t positives, std::size_t negatives,
                                                  cxr::Source source = cxr::Source::Synthetic) {
    std::vector<cxr::ImageRecord> out;
    for (std::size_t i = 0; i < positives + negatives; ++i) {
        cxr::ImageRecord r;
        r.id = make_id(i);
        r.path = "images/" + r.id + ".png";
        r.source = source;
        if (i < positives) {
            r.label = cxr::Label::Positive;
            r.finding = std::string(cxr::kPneumothoraxFinding);
        }
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<float> random_floats(cxr::Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
    return v;
}

}  // namespace testutil
