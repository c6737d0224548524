#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cxr/error.hpp"
#include "run_config.hpp"

namespace cxr::cli {

/// Missing or inconsistent input artifact. Maps to exit code 2.
class DataError : public Error {
public:
    using Error::Error;
};

struct IngestArgs {
    std::string out;
    bool check_images = true;
};

struct SynthArgs {
    std::string out;
};

struct EvaluateArgs {
    std::string out;  ///< empty: <cache>/reports/<mode>/<method>
    /// Train encoders in-process instead of loading train-encoder output.
    bool inline_encoders = false;
};

struct SearchArgs {
    std::vector<std::string> query_ids;
    std::string query_store;
    std::optional<int> fold;
    std::optional<std::size_t> k;
    std::string out;  ///< empty: stdout
    bool include_self = false;
};

struct ReportArgs {
    std::vector<std::string> inputs;
    std::string format = "table";
    std::string out;
};

int cmd_ingest(const RunConfig& cfg, const IngestArgs& args);
int cmd_synth(const RunConfig& cfg, const SynthArgs& args);
int cmd_extract(const RunConfig& cfg);
int cmd_train_encoder(const RunConfig& cfg);
int cmd_evaluate(const RunConfig& cfg, const EvaluateArgs& args);
int cmd_search(const RunConfig& cfg, const SearchArgs& args);
int cmd_report(const ReportArgs& args);

}  // namespace cxr::cli
