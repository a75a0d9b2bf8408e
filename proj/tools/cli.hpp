#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qlwave/model.hpp"
#include "qlwave/scaling.hpp"
#include "qlwave/solver.hpp"

namespace qlwave::cli {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kIncompleteMarker = "INCOMPLETE";
inline constexpr const char* kManifestName = "manifest.json";

enum ExitCode { kSuccess = 0, kVerificationFailure = 1, kUsageError = 2 };

/// Malformed or inconsistent configuration; the message names the key path.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    std::vector<double> epsilons;
    scaling::Source source = scaling::Source::Oracle;
    int levels = 3;
    Branch branch = Branch::FBranch;
    int j_max = 20;
    double tol_E = 1e-12;
    double slack_t1 = 0.02;
    double slack_t2 = 0.05;
    double t_end_fraction = 0.9;
    double slope_tolerance = 0.05;
    double guard = 0.05;
    std::optional<std::string> sweep_csv;
};

struct RunConfig {
    ProblemSpec spec;
    double sigma0 = 0.5;
    SolverConfig solver;
    ExperimentConfig experiment;
    std::optional<std::string> output;
    /// Every key with its default filled in.
    nlohmann::json resolved;
};

RunConfig load_config_json(const nlohmann::json& doc);
RunConfig load_config_text(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

struct Artifact {
    std::string name;
    std::string content;
};

struct ManifestEntry {
    std::string name;
    std::string sha256;
    std::size_t bytes = 0;
};

std::string sha256_hex(const std::string& data);

/// Writes each artifact through a temporary file and a rename, then the
/// manifest listing every file with its digest.
std::vector<ManifestEntry> emit_outputs(const std::vector<Artifact>& artifacts, const std::filesystem::path& dir,
                                        const nlohmann::json& header = nlohmann::json::object());

struct DispatchOptions {
    std::filesystem::path out_dir;
    bool quiet = false;
};

/// Runs one command and returns its exit status.
int dispatch(const std::string& command, const RunConfig& cfg, const DispatchOptions& opt);

/// Run directory used when --out is not given.
std::filesystem::path default_out_dir(const std::string& command, const RunConfig& cfg);

int main_entry(int argc, char** argv);

}  // namespace qlwave::cli
