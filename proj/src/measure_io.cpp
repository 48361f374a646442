#include <charconv>
#include <fstream>
#include <sstream>

#include "fedwad/error.hpp"
#include "fedwad/measures.hpp"
#include "fedwad/protocol.hpp"

namespace fedwad {
namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  return cells;
}

double parse_double(const std::string& cell, std::size_t line_no) {
  double v = 0.0;
  const auto* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::Io, "line " + std::to_string(line_no) + ": not a number: '" + cell + "'");
  }
  return v;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

Table parse_table(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split_row(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw Error(ErrorCode::ShapeMismatch, "line " + std::to_string(line_no) + " has " +
                                                std::to_string(cells.size()) + " cells, header has " +
                                                std::to_string(t.header.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_double(c, line_no));
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw Error(ErrorCode::Io, "missing header row");
  if (t.rows.empty()) throw Error(ErrorCode::ShapeMismatch, "no data rows");
  return t;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << data;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace

DiscreteMeasure parse_measure_csv(const std::string& text) {
  const Table t = parse_table(text);
  const bool weighted = t.header.back() == "weight";
  const Index d = static_cast<Index>(t.header.size()) - (weighted ? 1 : 0);
  if (d < 1) throw Error(ErrorCode::ShapeMismatch, "no coordinate columns");
  const Index n = static_cast<Index>(t.rows.size());
  Matrix pts(n, d);
  Vector w(n);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < d; ++k) pts(i, k) = t.rows[i][k];
    if (weighted) w[i] = t.rows[i][d];
  }
  if (weighted) return new_discrete(std::move(pts), std::move(w));
  return new_discrete(std::move(pts));
}

std::string format_measure_csv(const DiscreteMeasure& m) {
  std::string out;
  for (Index k = 0; k < m.dim(); ++k) out += "x" + std::to_string(k) + ",";
  out += "weight\n";
  for (Index i = 0; i < m.size(); ++i) {
    for (Index k = 0; k < m.dim(); ++k) out += format_double(m.points()(i, k)) + ",";
    out += format_double(m.weight(i)) + "\n";
  }
  return out;
}

DiscreteMeasure read_measure_csv(const std::filesystem::path& path) {
  return parse_measure_csv(read_file(path));
}

void write_measure_csv(const std::filesystem::path& path, const DiscreteMeasure& m) {
  write_file(path, format_measure_csv(m));
}

LabeledDataset read_labeled_csv(const std::filesystem::path& path) {
  const Table t = parse_table(read_file(path));
  if (t.header.back() != "label" || t.header.size() < 2) {
    throw Error(ErrorCode::ShapeMismatch, path.string() + ": last column must be 'label'");
  }
  const Index d = static_cast<Index>(t.header.size()) - 1;
  const Index n = static_cast<Index>(t.rows.size());
  Matrix f(n, d);
  std::vector<int> labels;
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < d; ++k) f(i, k) = t.rows[i][k];
    labels.push_back(static_cast<int>(t.rows[i][d]));
  }
  return LabeledDataset(std::move(f), std::move(labels));
}

void write_labeled_csv(const std::filesystem::path& path, const LabeledDataset& ds) {
  std::string out;
  for (Index k = 0; k < ds.dim(); ++k) out += "x" + std::to_string(k) + ",";
  out += "label\n";
  for (Index i = 0; i < ds.size(); ++i) {
    for (Index k = 0; k < ds.dim(); ++k) out += format_double(ds.features()(i, k)) + ",";
    out += std::to_string(ds.labels()[static_cast<std::size_t>(i)]) + "\n";
  }
  write_file(path, out);
}

DiscreteMeasure read_measure_fwm(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  return net::decode_measure(
      std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

void write_measure_fwm(const std::filesystem::path& path, const DiscreteMeasure& m) {
  const auto blob = net::encode_measure(m);
  write_file(path, std::string(blob.begin(), blob.end()));
}

}  // namespace fedwad
