#include "cpforge/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "cpforge/error.hpp"

namespace cpforge {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.push_back(std::move(cur));
  return cells;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "?" || cell == "NA" || cell == "na" || cell == "NaN" ||
         cell == "nan";
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

}  // namespace

Dataset Dataset::from_unsorted(Matrix observations, std::vector<int> labels,
                               std::vector<std::string> feature_names) {
  require(static_cast<std::size_t>(observations.rows()) == labels.size(), ErrorKind::data,
          "label count does not match row count");
  const std::size_t m = labels.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_partition(order.begin(), order.end(),
                        [&](std::size_t i) { return labels[i] == 1; });
  Matrix sorted(observations.rows(), observations.cols());
  std::vector<int> sorted_labels(m);
  for (std::size_t r = 0; r < m; ++r) {
    sorted.row(static_cast<Eigen::Index>(r)) = observations.row(static_cast<Eigen::Index>(order[r]));
    sorted_labels[r] = labels[order[r]];
  }
  return from_sorted(std::move(sorted), std::move(sorted_labels), std::move(feature_names),
                     std::move(order));
}

Dataset Dataset::from_sorted(Matrix observations, std::vector<int> labels,
                             std::vector<std::string> feature_names,
                             std::vector<std::size_t> original_index) {
  Dataset ds;
  ds.x_ = std::move(observations);
  ds.labels_ = std::move(labels);
  ds.names_ = std::move(feature_names);
  ds.original_ = std::move(original_index);
  if (ds.names_.empty()) {
    for (Eigen::Index j = 0; j < ds.x_.cols(); ++j) ds.names_.push_back("x" + std::to_string(j));
  }
  ds.m_pos_ = static_cast<std::size_t>(std::count(ds.labels_.begin(), ds.labels_.end(), 1));
  ds.validate();
  return ds;
}

void Dataset::validate() const {
  const std::size_t m = labels_.size();
  require(static_cast<std::size_t>(x_.rows()) == m, ErrorKind::data,
          "label count does not match row count");
  require(m >= 2, ErrorKind::data, "dataset needs at least 2 examples");
  require(x_.cols() >= 2, ErrorKind::data, "dataset needs at least 2 features");
  require(names_.size() == static_cast<std::size_t>(x_.cols()), ErrorKind::data,
          "feature name count does not match column count");
  require(original_.size() == m, ErrorKind::data, "index map size does not match row count");
  for (std::size_t i = 0; i < m; ++i) {
    require(labels_[i] == 1 || labels_[i] == -1, ErrorKind::data, "labels must be +1 or -1");
    require(i < m_pos_ ? labels_[i] == 1 : labels_[i] == -1, ErrorKind::data,
            "rows are not class-sorted (positives first)");
  }
  require(x_.allFinite(), ErrorKind::data, "non-finite entry in observations");
}

std::optional<std::size_t> Dataset::feature_index(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

Dataset Dataset::with_observations(Matrix observations) const {
  require(observations.rows() == x_.rows() && observations.cols() == x_.cols(), ErrorKind::data,
          "replacement observation matrix has the wrong shape");
  Dataset out = *this;
  out.x_ = std::move(observations);
  out.validate();
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Matrix x(static_cast<Eigen::Index>(rows.size()), x_.cols());
  std::vector<int> labels(rows.size());
  std::vector<std::size_t> orig(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r] < m(), ErrorKind::data, "subset row out of range");
    x.row(static_cast<Eigen::Index>(r)) = x_.row(static_cast<Eigen::Index>(rows[r]));
    labels[r] = labels_[rows[r]];
    orig[r] = original_[rows[r]];
  }
  Dataset tmp = from_unsorted(std::move(x), std::move(labels), names_);
  // from_unsorted indexes into the subset; map back to source rows.
  std::vector<std::size_t> mapped(tmp.original_.size());
  for (std::size_t r = 0; r < mapped.size(); ++r) mapped[r] = orig[tmp.original_[r]];
  tmp.original_ = std::move(mapped);
  tmp.meta = meta;
  return tmp;
}

Dataset parse_csv(const std::string& text, const CsvOptions& options) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) {
      header = split_csv_line(line);
      break;
    }
  }
  require(!header.empty(), ErrorKind::data, "missing header row");
  for (auto& h : header) h = trim(h);
  const auto label_it = std::find(header.begin(), header.end(), options.label_column);
  require(label_it != header.end(), ErrorKind::data,
          "missing column '" + options.label_column + "'");
  const std::size_t label_pos = static_cast<std::size_t>(label_it - header.begin());

  std::vector<std::string> names;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (j != label_pos) names.push_back(header[j]);

  std::vector<std::vector<double>> rows;
  std::vector<std::string> raw_labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    require(cells.size() == header.size(), ErrorKind::data,
            "line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                " cells, got " + std::to_string(cells.size()));
    std::vector<double> row;
    row.reserve(names.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      std::string cell = trim(cells[j]);
      if (j == label_pos) {
        raw_labels.push_back(cell);
        continue;
      }
      if (is_missing(cell)) {
        require(options.missing == MissingPolicy::zero, ErrorKind::data,
                "line " + std::to_string(line_no) + ": missing value in column '" + header[j] + "'");
        row.push_back(0.0);
        continue;
      }
      double v = 0.0;
      const char* first = cell.data();
      if (!cell.empty() && cell.front() == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), v);
      require(ec == std::errc() && ptr == cell.data() + cell.size() && std::isfinite(v),
              ErrorKind::data,
              "line " + std::to_string(line_no) + ": non-numeric cell '" + cell + "' in column '" +
                  header[j] + "'");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), ErrorKind::data, "no data rows");

  std::vector<std::string> distinct;
  for (const auto& l : raw_labels)
    if (std::find(distinct.begin(), distinct.end(), l) == distinct.end()) distinct.push_back(l);
  require(distinct.size() <= 2, ErrorKind::data,
          "label column has " + std::to_string(distinct.size()) + " distinct values; expected 2");
  require(std::find(distinct.begin(), distinct.end(), options.positive_label) != distinct.end(),
          ErrorKind::data, "empty class: positive label '" + options.positive_label + "' not found");
  require(distinct.size() == 2, ErrorKind::data, "empty class: only one label value present");
  const std::string negative = distinct[0] == options.positive_label ? distinct[1] : distinct[0];

  Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
  std::vector<int> labels(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < names.size(); ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    labels[i] = raw_labels[i] == options.positive_label ? 1 : -1;
  }
  Dataset ds = Dataset::from_unsorted(std::move(x), std::move(labels), std::move(names));
  ds.meta = LabelMeta{options.label_column, options.positive_label, negative, label_pos};
  return ds;
}

Dataset ingest_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::data, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), options);
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return std::to_string(v);
  return std::string(buf, ptr);
}

std::string to_csv(const Dataset& ds) {
  const std::size_t d = ds.d();
  const std::size_t label_pos = std::min(ds.meta.position, d);
  std::ostringstream out;
  std::vector<std::string> header;
  for (std::size_t j = 0, f = 0; j <= d; ++j) {
    if (j == label_pos) header.push_back(ds.meta.column);
    else header.push_back(ds.feature_names()[f++]);
  }
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << csv_escape(header[j]);
  out << '\n';

  std::vector<std::size_t> row_at(ds.m());
  for (std::size_t r = 0; r < ds.m(); ++r) row_at[ds.original_index()[r]] = r;
  for (std::size_t o = 0; o < ds.m(); ++o) {
    const std::size_t r = row_at[o];
    for (std::size_t j = 0, f = 0; j <= d; ++j) {
      if (j) out << ',';
      if (j == label_pos) {
        out << csv_escape(ds.label(r) == 1 ? ds.meta.positive : ds.meta.negative);
      } else {
        out << format_double(ds.x()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f++)));
      }
    }
    out << '\n';
  }
  return out.str();
}

void export_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::data, "cannot write '" + path.string() + "'");
  out << to_csv(ds);
}

Standardized standardize(const Dataset& train) {
  const auto m = static_cast<double>(train.m());
  ScalingParams p;
  p.mean = train.x().colwise().mean().transpose();
  p.stddev.resize(train.x().cols());
  p.constant.assign(train.d(), false);
  for (Eigen::Index j = 0; j < train.x().cols(); ++j) {
    const double var = (train.x().col(j).array() - p.mean(j)).square().sum() / m;
    const double sd = std::sqrt(var);
    if (sd < kStdFloor) {
      p.constant[static_cast<std::size_t>(j)] = true;
      p.stddev(j) = kStdFloor;
    } else {
      p.stddev(j) = sd;
    }
  }
  Dataset scaled = apply_scaling(train, p);
  return {std::move(scaled), std::move(p)};
}

Dataset apply_scaling(const Dataset& ds, const ScalingParams& p) {
  require(static_cast<std::size_t>(p.mean.size()) == ds.d(), ErrorKind::data,
          "scaling parameters do not match feature count");
  Matrix x = ds.x();
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (!p.constant.empty() && p.constant[static_cast<std::size_t>(j)]) {
      x.col(j).setZero();
    } else {
      x.col(j) = (x.col(j).array() - p.mean(j)) / p.stddev(j);
    }
  }
  return ds.with_observations(std::move(x));
}

Vector mean_operator(const Matrix& x, std::span<const int> labels) {
  require(static_cast<std::size_t>(x.rows()) == labels.size() && !labels.empty(), ErrorKind::data,
          "mean operator: shape mismatch");
  Vector mu = Vector::Zero(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    mu += static_cast<double>(labels[static_cast<std::size_t>(i)]) * x.row(i).transpose();
  return mu / static_cast<double>(x.rows());
}

Vector mean_operator(const Dataset& ds) { return mean_operator(ds.x(), ds.labels()); }

}  // namespace cpforge
