#pragma once

#include "parsec/simnet.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>

namespace parsec::cli {

inline constexpr int exit_pass = 0;
inline constexpr int exit_violation = 1;
inline constexpr int exit_usage = 2;

/// Parse failure with its location, formatted as "file:line: message".
class ScenarioError : public std::runtime_error {
public:
    ScenarioError(const std::string& file, std::size_t line, const std::string& message)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + message), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

struct ScenarioFile {
    SimScenario scenario;
    /// Output paths; empty means not written. Relative paths resolve against the out dir.
    std::string trace_path;
    std::string dot_path;
    std::string dot_node = "a";
    std::string report_path;
};

/// Parses the key = value format. `#` starts a comment; list keys repeat.
ScenarioFile parse_scenario(const std::string& text, const std::string& file_name = "<scenario>");
ScenarioFile load_scenario(const std::string& path);

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> steps;
    std::optional<std::size_t> n;
    bool expect_failure_allowed = false;
    /// Directory for artifacts; defaults to $PARSEC_SIM_OUT_DIR, then ".".
    std::optional<std::string> out_dir;
};

/// One-line run summary, e.g. "scenario s seed 1: terminated blocks=1 steps=40 violations=0".
std::string summary_line(const RunReport& report, std::size_t violations);

int cmd_run(const std::string& scenario_path, const Overrides& overrides, std::ostream& out, std::ostream& err);
int cmd_sweep(const std::string& scenario_path, std::uint64_t first_seed, std::uint64_t last_seed,
              const Overrides& overrides, std::ostream& out, std::ostream& err);
/// Writes DOT for `node` (a label such as "a") from a serialized report to `out_path`, or `out` when empty.
int cmd_export_dot(const std::string& report_path, const std::string& node, const std::string& out_path,
                   std::ostream& out, std::ostream& err);

/// Parses "A..B" (or a single seed) into an inclusive range.
std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& text);

}  // namespace parsec::cli
