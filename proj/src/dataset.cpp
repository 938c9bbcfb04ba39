#include "nnep/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nnep/errors.hpp"

namespace nnep {

namespace {

std::vector<std::vector<std::string>> split_records(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"') {
      quoted = true;
      any = true;
    } else if (ch == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field.push_back(ch);
      any = true;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::string cell_name(size_t row, size_t col, const std::string& header) {
  return "row " + std::to_string(row) + ", column " + std::to_string(col + 1) + " ('" + header + "')";
}

double parse_cell(const std::string& raw, size_t row, size_t col, const std::string& header) {
  const std::string s = trim(raw);
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (!s.empty() && *begin == '+') ++begin;
  const auto res = std::from_chars(begin, end, v);
  if (s.empty() || res.ec != std::errc() || res.ptr != end) {
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "nan" || lower == "inf" || lower == "-inf" || lower == "+inf" || lower == "infinity")
      throw NonFiniteError("non-finite value '" + s + "' at " + cell_name(row, col, header));
    throw ParseError("cannot parse '" + s + "' as a number at " + cell_name(row, col, header));
  }
  if (!std::isfinite(v)) throw NonFiniteError("non-finite value '" + s + "' at " + cell_name(row, col, header));
  return v;
}

}  // namespace

Table parse_csv(const std::string& text, const CsvOptions& opt) {
  const auto rows = split_records(text);
  if (rows.empty()) throw ParseError("missing header row");
  std::vector<std::string> header;
  for (const auto& h : rows[0]) header.push_back(trim(h));
  const size_t cols = header.size();
  if (cols == 0) throw ParseError("empty header row");

  bool hasTarget = true;
  size_t targetCol = cols - 1;
  if (opt.target) {
    auto it = std::find(header.begin(), header.end(), *opt.target);
    if (it == header.end()) {
      if (opt.requireTarget) throw ParseError("target column '" + *opt.target + "' not found in header");
      hasTarget = false;
    } else {
      targetCol = static_cast<size_t>(it - header.begin());
    }
  } else if (!opt.requireTarget) {
    hasTarget = false;
  }
  if (hasTarget && cols < 2) throw ParseError("need at least one input column and a target column");

  const size_t n = rows.size() - 1;
  const size_t d = hasTarget ? cols - 1 : cols;
  Table t;
  t.hasTarget = hasTarget;
  t.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  t.y = VectorXd::Zero(static_cast<Eigen::Index>(hasTarget ? n : 0));
  for (size_t c = 0; c < cols; ++c) {
    if (hasTarget && c == targetCol)
      t.targetName = header[c];
    else
      t.featureNames.push_back(header[c]);
  }
  for (size_t r = 0; r < n; ++r) {
    const auto& rec = rows[r + 1];
    if (rec.size() != cols)
      throw ParseError("row " + std::to_string(r + 2) + " has " + std::to_string(rec.size()) + " fields, expected " +
                       std::to_string(cols));
    size_t xc = 0;
    for (size_t c = 0; c < cols; ++c) {
      const double v = parse_cell(rec[c], r + 2, c, header[c]);
      if (hasTarget && c == targetCol)
        t.y(static_cast<Eigen::Index>(r)) = v;
      else
        t.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(xc++)) = v;
    }
  }
  return t;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Table read_csv(const std::string& path, const CsvOptions& opt) { return parse_csv(read_file(path), opt); }

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::string format_csv(const Table& t) {
  std::string out;
  for (size_t c = 0; c < t.featureNames.size(); ++c) {
    if (c) out += ',';
    out += t.featureNames[c];
  }
  if (t.hasTarget) out += (t.featureNames.empty() ? "" : ",") + t.targetName;
  out += '\n';
  for (Eigen::Index r = 0; r < t.X.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.X.cols(); ++c) {
      if (c) out += ',';
      out += format_double(t.X(r, c));
    }
    if (t.hasTarget) out += (t.X.cols() ? "," : "") + format_double(t.y(r));
    out += '\n';
  }
  return out;
}

NormStats fit_normalization(const Table& t) {
  const Eigen::Index n = t.X.rows();
  if (n < 2) throw ParseError("need at least two rows to normalize");
  NormStats s;
  s.xMean = t.X.colwise().mean().transpose();
  s.xStd.resize(t.X.cols());
  for (Eigen::Index c = 0; c < t.X.cols(); ++c) {
    const double sd = std::sqrt((t.X.col(c).array() - s.xMean(c)).square().sum() / (n - 1.0));
    s.xStd(c) = sd;
    if (!(sd > 0.0)) {
      const std::string name = c < static_cast<Eigen::Index>(t.featureNames.size()) ? t.featureNames[c] : "?";
      throw ConstantColumnError("input column '" + name + "' is constant (std 0)");
    }
  }
  if (t.hasTarget) {
    s.yMean = t.y.mean();
    s.yStd = std::sqrt((t.y.array() - s.yMean).square().sum() / (n - 1.0));
    if (!(s.yStd > 0.0)) throw ConstantColumnError("target column '" + t.targetName + "' is constant (std 0)");
  }
  return s;
}

MatrixXd normalize_inputs(const MatrixXd& Xraw, const NormStats& stats) {
  if (Xraw.cols() != stats.xMean.size())
    throw DimensionMismatch("data has " + std::to_string(Xraw.cols()) + " input columns, model expects " +
                            std::to_string(stats.xMean.size()));
  MatrixXd X(Xraw.rows(), Xraw.cols() + 1);
  for (Eigen::Index c = 0; c < Xraw.cols(); ++c)
    X.col(c) = (Xraw.col(c).array() - stats.xMean(c)) / stats.xStd(c);
  X.col(Xraw.cols()).setOnes();
  return X;
}

MatrixXd denormalize_inputs(const MatrixXd& X, const NormStats& stats) {
  const Eigen::Index d = stats.xMean.size();
  MatrixXd raw(X.rows(), d);
  for (Eigen::Index c = 0; c < d; ++c) raw.col(c) = X.col(c).array() * stats.xStd(c) + stats.xMean(c);
  return raw;
}

VectorXd denormalize_target(const VectorXd& y, const NormStats& stats) {
  return (y.array() * stats.yStd + stats.yMean).matrix();
}

Dataset normalize(const Table& t, const NormStats& stats) {
  Dataset ds;
  ds.norm = stats;
  ds.X = normalize_inputs(t.X, stats);
  if (t.hasTarget) ds.y = ((t.y.array() - stats.yMean) / stats.yStd).matrix();
  ds.featureNames = t.featureNames;
  ds.targetName = t.targetName;
  return ds;
}

Dataset normalize(const Table& t) { return normalize(t, fit_normalization(t)); }

Dataset load_csv(const std::string& path, const CsvOptions& opt) { return normalize(read_csv(path, opt)); }

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot write '" + tmp.string() + "'");
    out << contents;
    if (!out) throw ParseError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw ParseError("cannot move output into '" + path + "': " + ec.message());
  }
}

}  // namespace nnep
