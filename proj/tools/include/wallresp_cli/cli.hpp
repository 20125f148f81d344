#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "wallresp/comm.hpp"
#include "wallresp/pipeline.hpp"

namespace wallresp::cli {

struct RunConfig {
  std::string command;
  SolverConfig solver;
  int ranks = 1;
  std::string out;
  std::string report;
  std::string input;
  std::string layout = "row";  // convert: row | col
  Index record = 0;            // convert: 0-based record index
  std::string sweep;           // bench: key=v1,v2,...
  int verbosity = 0;
};

using KeyValues = std::map<std::string, std::string>;

/// Keys accepted in config files and the canonical form.
const std::vector<std::string>& config_keys();

/// Parses INI text (';' comments, no sections). Throws ConfigError on
/// unknown keys, sections or malformed lines.
KeyValues parse_ini(const std::string& text);

/// One key=value per line, sorted by key.
std::string canonical(const KeyValues& kv);

/// Applies key=value pairs over the defaults and validates.
RunConfig to_run_config(const std::string& command, int ranks, const KeyValues& kv);

/// Collective: rank 0 reads `config_path` (if non-empty), applies
/// `overrides` and broadcasts the canonical text; every rank parses it.
RunConfig load_config(comm::RankCtx& ctx, const std::string& command,
                      const std::string& config_path, const KeyValues& overrides);

/// Number of ranks from --ranks or WALLRESP_RANKS (default 1).
int resolve_ranks(int flag_value);

/// Bench CSV header and one row; `stages` follow stage_names() plus
/// write_response.
std::string bench_header();
std::string bench_row(const RunConfig& cfg, const SolveReport& rep, double write_seconds);

/// Entry point used by main and the tests. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wallresp::cli
