#include "common.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>

#include "cpforge/error.hpp"

namespace cpforge::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Splits on commas outside double quotes, keeping every cell's text verbatim.
std::vector<std::string> raw_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') quoted = !quoted;
    if (c == ',' && !quoted) {
      cells.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.push_back(std::move(cur));
  return cells;
}

}  // namespace

ManifestGuard::ManifestGuard(std::filesystem::path out_dir, RunManifest manifest,
                             std::string filename)
    : dir_(std::move(out_dir)),
      filename_(std::move(filename)),
      manifest_(std::move(manifest)), start_(std::chrono::steady_clock::now()) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  require(!ec, ErrorKind::data, "cannot create " + dir_.string() + ": " + ec.message());
  manifest_.status = "running";
  write();
}

ManifestGuard::~ManifestGuard() {
  if (done_) return;
  manifest_.status = "failed";
  try {
    write();
  } catch (...) {
  }
}

void ManifestGuard::add_output(const std::string& key, const std::filesystem::path& path) {
  manifest_.outputs[key] = path.filename().string();
}

void ManifestGuard::set(const std::string& key, nlohmann::json value) {
  manifest_.config[key] = std::move(value);
}

void ManifestGuard::finish() {
  manifest_.status = "complete";
  write();
  done_ = true;
}

void ManifestGuard::write() {
  manifest_.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  write_manifest(dir_ / filename_, manifest_);
}

nlohmann::json to_json(const DataArgs& args) {
  return {{"data", args.data.string()},
          {"label", args.label},
          {"positive", args.positive},
          {"missing", args.missing}};
}

nlohmann::json to_json(const SearchConfig& c) {
  const char* mode = c.candidate_mode == CandidateMode::exhaustive ? "exhaustive"
                     : c.candidate_mode == CandidateMode::sampled  ? "sampled"
                                                                   : "auto";
  return {{"iterations", c.iterations},
          {"candidate_mode", mode},
          {"sample_count", c.sample_count},
          {"block_class", c.block_class},
          {"retrain_every", c.retrain_every},
          {"early_stop_patience", c.early_stop_patience},
          {"seed", c.seed},
          {"pvalue_every", c.pvalue_every},
          {"pvalue_resamples", c.pvalue_resamples},
          {"rcp_radius", c.rcp_radius},
          {"acceptance", "strict improvement"}};
}

Dataset load_dataset(const DataArgs& args) {
  require(!args.label.empty(), ErrorKind::usage, "--label is required");
  CsvOptions opts;
  opts.label_column = args.label;
  opts.positive_label = args.positive;
  if (args.missing == "zero") opts.missing = MissingPolicy::zero;
  else if (args.missing == "error") opts.missing = MissingPolicy::error;
  else fail(ErrorKind::usage, "--missing must be zero or error");
  return ingest_csv(args.data, opts);
}

FeatureSplit resolve_split(const Dataset& ds, const SplitArgs& args) {
  std::vector<std::string> names = args.shuffle;
  if (args.file) {
    std::istringstream in(read_text_file(*args.file));
    std::string tok;
    while (std::getline(in, tok, '\n')) {
      std::istringstream line(tok);
      std::string name;
      while (std::getline(line, name, ','))
        if (!trim(name).empty()) names.push_back(trim(name));
    }
  }
  if (args.mode == "first-half" && names.empty()) return FeatureSplit::first_half(ds.d());
  require(args.mode == "explicit" || args.mode == "first-half", ErrorKind::usage,
          "--split must be first-half or explicit");
  require(!names.empty(), ErrorKind::usage, "explicit split needs --shuffle or --split-file");
  return FeatureSplit::from_shuffle_names(ds, names);
}

SearchConfig make_search_config(const SearchArgs& args, std::uint64_t seed) {
  SearchConfig c;
  c.iterations = args.iters;
  if (args.candidates == "auto") c.candidate_mode = CandidateMode::automatic;
  else if (args.candidates == "exhaustive") c.candidate_mode = CandidateMode::exhaustive;
  else if (args.candidates == "sampled") c.candidate_mode = CandidateMode::sampled;
  else fail(ErrorKind::usage, "--candidates must be auto, exhaustive or sampled");
  require(args.samples >= 1, ErrorKind::usage, "--samples must be at least 1");
  c.sample_count = args.samples;
  c.early_stop_patience = args.patience;
  c.pvalue_every = args.pvalue_every;
  c.pvalue_resamples = args.pvalue_resamples;
  c.block_class = !args.cross_class;
  c.seed = seed;
  return c;
}

std::string permute_csv_text(const std::string& text, const Dataset& ds, const FeatureSplit& split,
                             const Permutation& perm) {
  require(perm.size() == ds.m(), ErrorKind::usage, "permutation size does not match the dataset");
  std::vector<std::string> lines;
  {
    std::size_t pos = 0;
    while (true) {
      const auto nl = text.find('\n', pos);
      if (nl == std::string::npos) {
        lines.push_back(text.substr(pos));
        break;
      }
      lines.push_back(text.substr(pos, nl - pos));
      pos = nl + 1;
    }
  }

  // Data lines in file order; the first non-blank line is the header.
  std::vector<std::size_t> data_lines;
  bool header_seen = false;
  for (std::size_t k = 0; k < lines.size(); ++k) {
    if (trim(lines[k]).empty()) continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    data_lines.push_back(k);
  }
  require(data_lines.size() == ds.m(), ErrorKind::data, "CSV text does not match the dataset");

  const std::size_t label_pos = ds.meta.position;
  std::vector<std::size_t> columns;
  for (std::size_t j : split.shuffle()) columns.push_back(j < label_pos ? j : j + 1);

  struct Row {
    std::vector<std::string> cells;
    bool cr = false;
  };
  std::vector<Row> rows(data_lines.size());
  for (std::size_t r = 0; r < data_lines.size(); ++r) {
    std::string line = lines[data_lines[r]];
    rows[r].cr = !line.empty() && line.back() == '\r';
    if (rows[r].cr) line.pop_back();
    rows[r].cells = raw_cells(line);
  }

  const auto& orig = ds.original_index();
  std::vector<Row> out = rows;
  for (std::size_t i = 0; i < ds.m(); ++i) {
    const std::size_t dst = orig[i], src = orig[perm[i]];
    for (std::size_t c : columns) out[dst].cells[c] = rows[src].cells[c];
  }
  for (std::size_t r = 0; r < out.size(); ++r) {
    std::string line;
    for (std::size_t c = 0; c < out[r].cells.size(); ++c) {
      if (c > 0) line.push_back(',');
      line += out[r].cells[c];
    }
    if (out[r].cr) line.push_back('\r');
    lines[data_lines[r]] = std::move(line);
  }

  std::string result;
  result.reserve(text.size());
  for (std::size_t k = 0; k < lines.size(); ++k) {
    if (k > 0) result.push_back('\n');
    result += lines[k];
  }
  return result;
}

nlohmann::json aggregate_traces(const std::vector<std::vector<TraceRecord>>& traces) {
  require(!traces.empty(), ErrorKind::usage, "no traces to aggregate");
  const std::size_t len = traces.front().size();
  for (const auto& t : traces)
    require(t.size() == len, ErrorKind::data, "traces have different lengths");

  using Getter = std::optional<double> (*)(const TraceRecord&);
  const std::vector<std::pair<const char*, Getter>> columns = {
      {"objective", [](const TraceRecord& r) -> std::optional<double> { return r.objective; }},
      {"hsic", [](const TraceRecord& r) { return r.hsic; }},
      {"p_value", [](const TraceRecord& r) { return r.p_value; }},
      {"phi_risk", [](const TraceRecord& r) { return r.phi_risk; }},
      {"test_error", [](const TraceRecord& r) { return r.test_error; }},
      {"rcp_bound", [](const TraceRecord& r) { return r.rcp_bound; }},
      {"odd_cycles",
       [](const TraceRecord& r) -> std::optional<double> { return static_cast<double>(r.odd_cycles); }},
      {"fixed_points", [](const TraceRecord& r) -> std::optional<double> {
         return static_cast<double>(r.fixed_points);
       }}};

  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t k = 0; k < len; ++k) {
    const std::size_t iteration = traces.front()[k].iteration;
    nlohmann::json row = {{"iteration", iteration}, {"runs", traces.size()}};
    for (const auto& t : traces)
      require(t[k].iteration == iteration, ErrorKind::data, "traces disagree on iteration numbers");
    for (const auto& [name, get] : columns) {
      std::vector<double> vals;
      for (const auto& t : traces)
        if (auto v = get(t[k])) vals.push_back(*v);
      if (vals.empty()) {
        row[std::string(name) + "_mean"] = nullptr;
        row[std::string(name) + "_stderr"] = nullptr;
        continue;
      }
      double mean = 0.0;
      for (double v : vals) mean += v;
      mean /= static_cast<double>(vals.size());
      double ss = 0.0;
      for (double v : vals) ss += (v - mean) * (v - mean);
      const double n = static_cast<double>(vals.size());
      const double se = vals.size() > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
      row[std::string(name) + "_mean"] = mean;
      row[std::string(name) + "_stderr"] = se;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string aggregate_to_csv(const nlohmann::json& aggregate) {
  static const char* kColumns[] = {"objective", "hsic", "p_value", "phi_risk",
                                   "test_error", "rcp_bound", "odd_cycles", "fixed_points"};
  std::ostringstream out;
  out << "iteration,runs";
  for (const char* c : kColumns) out << ',' << c << "_mean," << c << "_stderr";
  out << '\n';
  for (const auto& row : aggregate) {
    out << row["iteration"].get<std::size_t>() << ',' << row["runs"].get<std::size_t>();
    for (const char* c : kColumns) {
      for (const char* suffix : {"_mean", "_stderr"}) {
        const auto& v = row[std::string(c) + suffix];
        out << ',';
        if (!v.is_null()) out << format_double(v.get<double>());
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace cpforge::cli
