#include "wallresp_cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <unistd.h>

#include "wallresp/error.hpp"
#include "wallresp/pario.hpp"

namespace wallresp::cli {

namespace {

struct FlagSpec {
  const char* flag;
  const char* key;
  const char* help;
};

// Command-line flags that map onto config keys.
const FlagSpec kFlags[] = {
    {"--nb", "nb", "Blocking factor NB"},
    {"--nwu", "n_wu", "Wall mesh poloidal cells"},
    {"--nwv", "n_wv", "Wall mesh toroidal cells"},
    {"--npu", "n_pu", "Plasma mesh poloidal cells"},
    {"--npv", "n_pv", "Plasma mesh toroidal cells"},
    {"--nharm", "n_harm", "Number of harmonics"},
    {"--nbnd", "n_bnd", "Number of boundary elements"},
    {"--eta", "eta", "Wall resistivity"},
    {"--kernel-h", "h", "Kernel regularization length"},
    {"--ridge", "ridge", "Ridge scale (mu = ridge * trace / n)"},
    {"--jitter", "jitter", "Vertex jitter amplitude"},
    {"--chunk-limit", "chunk_limit", "Max elements per collective I/O call"},
    {"--out", "out", "Output path"},
    {"--report", "report", "CSV report path (default: stdout)"},
    {"--seed", "seed", "Random seed"},
    {"--sweep", "sweep", "bench: key=v1,v2,... over ranks, nb, n_w, n_wu, n_wv or chunk_limit"},
    {"--in", "in", "convert: input file"},
    {"--layout", "layout", "convert: row or col"},
    {"--record", "record", "convert: 0-based record index"},
};

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* first = v.data();
  const char* last = v.data() + v.size();
  const auto r = std::from_chars(first, last, out);
  if (r.ec != std::errc() || r.ptr != last || v.empty()) {
    throw ConfigError("key '" + key + "': cannot parse '" + v + "'");
  }
  return out;
}

void set_key(RunConfig& rc, const std::string& key, const std::string& v) {
  auto& s = rc.solver;
  if (key == "n_wu") s.n_wu = parse_number<Index>(key, v);
  else if (key == "n_wv") s.n_wv = parse_number<Index>(key, v);
  else if (key == "n_pu") s.n_pu = parse_number<Index>(key, v);
  else if (key == "n_pv") s.n_pv = parse_number<Index>(key, v);
  else if (key == "n_harm") s.n_harm = parse_number<Index>(key, v);
  else if (key == "n_bnd") s.n_bnd = parse_number<Index>(key, v);
  else if (key == "nb") s.nb = parse_number<Index>(key, v);
  else if (key == "eta") s.eta = parse_number<double>(key, v);
  else if (key == "h") s.h = parse_number<double>(key, v);
  else if (key == "ridge") s.ridge = parse_number<double>(key, v);
  else if (key == "chunk_limit") s.chunk_limit = parse_number<std::uint64_t>(key, v);
  else if (key == "wall_major") s.wall_major = parse_number<double>(key, v);
  else if (key == "wall_minor") s.wall_minor = parse_number<double>(key, v);
  else if (key == "plasma_major") s.plasma_major = parse_number<double>(key, v);
  else if (key == "plasma_minor") s.plasma_minor = parse_number<double>(key, v);
  else if (key == "jitter") s.jitter = parse_number<double>(key, v);
  else if (key == "seed") s.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "out") rc.out = v;
  else if (key == "report") rc.report = v;
  else if (key == "in") rc.input = v;
  else if (key == "layout") rc.layout = v;
  else if (key == "record") rc.record = parse_number<Index>(key, v);
  else if (key == "sweep") rc.sweep = v;
  else if (key == "verbosity") rc.verbosity = parse_number<int>(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

std::string human_bytes(std::uint64_t b) {
  const char* units[] = {"B", "kB", "MB", "GB", "TB", "PB", "EB"};
  double v = static_cast<double>(b);
  int u = 0;
  while (v >= 1000.0 && u < 6) {
    v /= 1000.0;
    ++u;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g %s", v, units[u]);
  return buf;
}

// Opens `path` for writing, or returns the fallback stream when empty.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw IoError("cannot open '" + path + "' for writing");
      os_ = &file_;
    }
  }
  std::ostream& operator*() { return *os_; }

 private:
  std::ofstream file_;
  std::ostream* os_;
};

void cmd_generate(comm::RankCtx& ctx, const RunConfig& rc, std::ostream& out) {
  if (!ctx.is_root()) return;
  const auto s = ProblemSizes::of(rc.solver);
  const Meshes m = make_meshes(rc.solver);
  out << "ntri_w=" << m.wall.ntri() << " npot_w=" << m.wall.npot << " ntri_p=" << m.plasma.ntri()
      << " npot_p=" << m.plasma.npot << " nd_w=" << s.nd_w << " nd_bez=" << s.nd_bez << "\n";
  if (!rc.out.empty()) {
    std::ofstream f(rc.out);
    if (!f) throw IoError("cannot open '" + rc.out + "' for writing");
    f << "wall\n";
    write_mesh(f, m.wall);
    f << "plasma\n";
    write_mesh(f, m.plasma);
  }
}

void cmd_solve(comm::RankCtx& ctx, const RunConfig& rc, std::ostream& out) {
  SolveReport rep;
  const ResponseSet r = solve_wall_response(ctx, rc.solver, &rep);
  if (!rc.out.empty()) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      pario::write_response(ctx, rc.out, r, rc.solver.chunk_limit);
    } catch (const comm::CollectiveError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError("write_response", e.what());
    }
    const double secs = ctx.allreduce_max(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    rep.stages.push_back({"write_response", secs, rep.stages.back().peak_bytes_per_rank});
  }
  if (!ctx.is_root()) return;
  Sink sink(rc.report, out);
  *sink << "stage,seconds,peak_bytes_per_rank\n";
  for (const auto& st : rep.stages) {
    *sink << st.name << ',' << st.seconds << ',' << st.peak_bytes_per_rank << "\n";
  }
  if (!rc.report.empty()) {
    out << "solved: nd_w=" << r.gamma.size() << " gamma_min=" << r.gamma.front()
        << " gamma_max=" << r.gamma.back() << "\n";
  }
}

void cmd_predict_mem(comm::RankCtx& ctx, const RunConfig& rc, std::ostream& out) {
  if (!ctx.is_root()) return;
  const auto p = predict_memory(rc.solver, rc.ranks);
  Sink sink(rc.report, out);
  *sink << "matrix,rows,cols,bytes,max_rank_bytes,allocated\n";
  for (const auto& m : p.matrices) {
    *sink << m.name << ',' << m.rows << ',' << m.cols << ',' << m.bytes << ',' << m.max_rank_bytes
          << ',' << (m.allocated ? 1 : 0) << "\n";
  }
  *sink << "total," << "," << "," << p.total_bytes << ',' << p.max_rank_bytes << ",1\n";
  out << "total " << human_bytes(p.total_bytes) << ", max per rank "
      << human_bytes(p.max_rank_bytes) << " on " << rc.ranks << " ranks\n";
  for (const auto& m : p.matrices) {
    if (!m.allocated) {
      out << m.name << " (not formed) would need " << human_bytes(m.bytes) << "\n";
    }
  }
}

void cmd_convert(comm::RankCtx& ctx, const RunConfig& rc, std::ostream& out) {
  if (rc.input.empty()) throw ConfigError("convert needs --in");
  if (rc.layout != "row" && rc.layout != "col") {
    throw ConfigError("layout must be 'row' or 'col', got '" + rc.layout + "'");
  }
  const auto records = pario::scan_records(ctx, rc.input);
  if (rc.record < 0 || rc.record >= static_cast<Index>(records.size())) {
    throw ConfigError("record " + std::to_string(rc.record) + " out of range; file has " +
                      std::to_string(records.size()));
  }
  const auto& rec = records[static_cast<std::size_t>(rc.record)];
  const StripedMatrix s = pario::read_striped(ctx, rc.input, rc.layout == "row",
                                              rc.solver.chunk_limit, rec.offset);
  std::ostringstream os;
  os.precision(17);
  os << "# rank " << ctx.rank() << ' ' << (s.row_wise ? "rows" : "cols") << ' ' << s.ind_start
     << ".." << s.ind_end << " of " << s.rows() << "x" << s.cols() << "\n";
  for (Index i = 0; i < s.loc_mat.rows(); ++i) {
    for (Index j = 0; j < s.loc_mat.cols(); ++j) os << (j ? " " : "") << s.loc_mat(i, j);
    os << "\n";
  }
  auto parts = ctx.allgather(comm::string_bytes(os.str()));
  if (!ctx.is_root()) return;
  Sink sink(rc.out, out);
  for (const auto& p : parts) *sink << comm::bytes_string(p);
}

struct Sweep {
  std::string key;
  std::vector<std::string> values;
};

Sweep parse_sweep(const std::string& text) {
  Sweep sw;
  if (text.empty()) return sw;
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("sweep must look like key=v1,v2,...");
  sw.key = text.substr(0, eq);
  if (sw.key == "P") sw.key = "ranks";
  const std::vector<std::string> allowed = {"ranks", "nb", "n_w", "n_wu", "n_wv", "chunk_limit"};
  if (std::find(allowed.begin(), allowed.end(), sw.key) == allowed.end()) {
    throw ConfigError("cannot sweep over '" + sw.key + "'");
  }
  std::stringstream ss(text.substr(eq + 1));
  std::string v;
  while (std::getline(ss, v, ',')) {
    if (!v.empty()) sw.values.push_back(v);
  }
  if (sw.values.empty()) throw ConfigError("sweep over '" + sw.key + "' has no values");
  return sw;
}

void cmd_bench(const RunConfig& base, std::ostream& out) {
  const Sweep sw = parse_sweep(base.sweep);
  std::vector<RunConfig> runs;
  if (sw.values.empty()) runs.push_back(base);
  for (const auto& v : sw.values) {
    RunConfig rc = base;
    if (sw.key == "ranks") {
      rc.ranks = parse_number<int>("ranks", v);
      if (rc.ranks < 1) throw ConfigError("ranks must be >= 1");
    } else if (sw.key == "n_w") {
      set_key(rc, "n_wu", v);
      set_key(rc, "n_wv", v);
    } else {
      set_key(rc, sw.key, v);
    }
    rc.solver.validate();
    runs.push_back(rc);
  }

  Sink sink(base.report, out);
  *sink << bench_header() << "\n";
  const auto tmp = std::filesystem::temp_directory_path() /
                   ("wallresp_bench_" + std::to_string(::getpid()) + ".swrm");
  const std::string path = base.out.empty() ? tmp.string() : base.out;
  for (const auto& rc : runs) {
    SolveReport rep;
    double wsec = 0.0;
    comm::run(rc.ranks, [&](comm::RankCtx& ctx) {
      SolveReport r;
      const ResponseSet set = solve_wall_response(ctx, rc.solver, &r);
      const auto t0 = std::chrono::steady_clock::now();
      pario::write_response(ctx, path, set, rc.solver.chunk_limit);
      const double w = ctx.allreduce_max(
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      if (ctx.is_root()) {
        rep = std::move(r);
        wsec = w;
      }
    });
    *sink << bench_row(rc, rep, wsec) << "\n";
  }
  if (base.out.empty()) std::filesystem::remove(tmp);
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "chunk_limit", "eta",         "h",      "in",     "jitter",       "layout",
      "n_bnd",       "n_harm",      "n_pu",   "n_pv",   "n_wu",         "n_wv",
      "nb",          "out",         "plasma_major",     "plasma_minor", "record",
      "report",      "ridge",       "seed",   "sweep",  "verbosity",    "wall_major",
      "wall_minor"};
  return keys;
}

KeyValues parse_ini(const std::string& text) {
  std::istringstream in(text);
  KeyValues kv;
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_config(in);
  } catch (const CLI::Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  const auto& keys = config_keys();
  for (const auto& it : items) {
    if (!it.parents.empty() && !(it.parents.size() == 1 && it.parents[0] == "default")) {
      throw ConfigError("config: sections are not supported ('" + it.fullname() + "')");
    }
    if (std::find(keys.begin(), keys.end(), it.name) == keys.end()) {
      throw ConfigError("config: unknown key '" + it.name + "'");
    }
    if (it.inputs.size() != 1) throw ConfigError("config: key '" + it.name + "' needs one value");
    kv[it.name] = it.inputs.front();
  }
  return kv;
}

std::string canonical(const KeyValues& kv) {
  std::string s;
  for (const auto& [k, v] : kv) {
    if (v.find('\n') != std::string::npos) throw ConfigError("value of '" + k + "' spans lines");
    s += k + "=" + v + "\n";
  }
  return s;
}

RunConfig to_run_config(const std::string& command, int ranks, const KeyValues& kv) {
  RunConfig rc;
  rc.command = command;
  rc.ranks = ranks;
  for (const auto& [k, v] : kv) set_key(rc, k, v);
  rc.solver.validate();
  return rc;
}

RunConfig load_config(comm::RankCtx& ctx, const std::string& command,
                      const std::string& config_path, const KeyValues& overrides) {
  std::string text;
  std::string error;
  if (ctx.is_root()) {
    try {
      KeyValues kv;
      if (!config_path.empty()) {
        std::ifstream f(config_path);
        if (!f) throw ConfigError("cannot read config '" + config_path + "'");
        std::stringstream ss;
        ss << f.rdbuf();
        kv = parse_ini(ss.str());
      }
      for (const auto& [k, v] : overrides) kv[k] = v;
      text = canonical(kv);
    } catch (const std::exception& e) {
      error = e.what();
    }
  }
  error = comm::bytes_string(ctx.broadcast(0, comm::string_bytes(error)));
  if (!error.empty()) throw ConfigError(error);
  text = comm::bytes_string(ctx.broadcast(0, comm::string_bytes(text)));

  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return to_run_config(command, ctx.size(), kv);
}

int resolve_ranks(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("WALLRESP_RANKS")) {
    const int p = parse_number<int>("WALLRESP_RANKS", env);
    if (p < 1) throw ConfigError("WALLRESP_RANKS must be >= 1");
    return p;
  }
  return 1;
}

std::string bench_header() {
  std::string h = "ranks,nb,n_wu,n_wv,ntri_w,chunk_limit";
  for (const auto& s : stage_names()) h += "," + s;
  h += ",write_response,total_seconds";
  return h;
}

std::string bench_row(const RunConfig& rc, const SolveReport& rep, double write_seconds) {
  std::ostringstream os;
  const auto& s = rc.solver;
  os << rc.ranks << ',' << s.nb << ',' << s.n_wu << ',' << s.n_wv << ',' << 2 * s.n_wu * s.n_wv
     << ',' << s.chunk_limit;
  double total = write_seconds;
  for (const auto& name : stage_names()) {
    double secs = 0.0;
    for (const auto& st : rep.stages) {
      if (st.name == name) secs = st.seconds;
    }
    total += secs;
    os << ',' << secs;
  }
  os << ',' << write_seconds << ',' << total;
  return os.str();
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distributed wall-response solver"};
  app.require_subcommand(1);
  std::string config_path;
  int ranks_flag = 0;
  int verbosity = 0;
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> opts;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"generate", "Generate the wall and plasma meshes"},
      {"solve", "Run the response pipeline and write the response file"},
      {"bench", "Time the pipeline over a parameter sweep"},
      {"predict-mem", "Predict matrix memory for a configuration"},
      {"convert", "Re-stripe a record of a matrix file and dump it"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "INI config file (key = value)");
    sub->add_option("--ranks", ranks_flag, "Number of ranks P (default $WALLRESP_RANKS or 1)")
        ->check(CLI::PositiveNumber);
    sub->add_flag("-v,--verbose", verbosity, "More output");
    for (const auto& f : kFlags) {
      auto* o = sub->add_option(f.flag, values[std::string(name) + "/" + f.key], f.help);
      opts.emplace_back(std::string(name) + "/" + f.key, o);
    }
  }

  try {
    app.parse(argc, const_cast<char**>(argv));
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  const std::string command = app.get_subcommands().front()->get_name();
  KeyValues overrides;
  for (const auto& [id, o] : opts) {
    const auto slash = id.find('/');
    if (id.substr(0, slash) == command && o->count() > 0) overrides[id.substr(slash + 1)] = values[id];
  }
  if (verbosity > 0) overrides["verbosity"] = std::to_string(verbosity);

  try {
    const int ranks = resolve_ranks(ranks_flag);
    if (command == "bench" || command == "predict-mem") {
      RunConfig base;
      comm::run(1, [&](comm::RankCtx& ctx) {
        base = load_config(ctx, command, config_path, overrides);
        base.ranks = ranks;
        if (command == "predict-mem") cmd_predict_mem(ctx, base, out);
      });
      if (command == "bench") cmd_bench(base, out);
      return 0;
    }
    comm::run(ranks, [&](comm::RankCtx& ctx) {
      RunConfig rc = load_config(ctx, command, config_path, overrides);
      if (command == "generate") cmd_generate(ctx, rc, out);
      else if (command == "solve") cmd_solve(ctx, rc, out);
      else cmd_convert(ctx, rc, out);
    });
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace wallresp::cli
