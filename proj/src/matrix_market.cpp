#include "fixedrank/matrix_market.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "fixedrank/errors.hpp"

namespace fixedrank {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

[[noreturn]] void fail(long line, const std::string& what) {
  std::ostringstream os;
  os << "matrix market, line " << line << ": " << what;
  throw ParseError(os.str(), line);
}

// Reads the next line that is neither blank nor a comment.
bool next_data_line(std::istream& in, std::string& out, long& line) {
  while (std::getline(in, out)) {
    ++line;
    const auto first = out.find_first_not_of(" \t\r");
    if (first == std::string::npos || out[first] == '%') continue;
    return true;
  }
  return false;
}

// Parses exactly `count` whitespace-separated tokens of a line.
template <class... T>
void parse_fields(const std::string& text, long line, const char* what, T&... fields) {
  std::istringstream is(text);
  if (!((is >> fields) && ...)) fail(line, std::string("malformed ") + what);
  std::string extra;
  if (is >> extra) fail(line, std::string("trailing data on ") + what);
}

}  // namespace

MatrixMarketContent read_matrix_market(std::istream& in) {
  long line = 0;
  std::string text;
  if (!std::getline(in, text)) fail(1, "empty file");
  ++line;
  std::istringstream header(text);
  std::string banner, object, format, field, symmetry;
  header >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket") fail(line, "missing %%MatrixMarket banner");
  if (lower(object) != "matrix") fail(line, "unsupported object '" + object + "'");
  format = lower(format);
  if (format != "array" && format != "coordinate") {
    fail(line, "unsupported format '" + format + "'");
  }
  field = lower(field);
  if (field != "real" && field != "integer" && field != "double") {
    fail(line, "unsupported field '" + field + "'");
  }
  if (lower(symmetry) != "general") fail(line, "unsupported symmetry '" + symmetry + "'");

  if (!next_data_line(in, text, line)) fail(line + 1, "missing size line");
  if (format == "array") {
    long rows = 0, cols = 0;
    parse_fields(text, line, "size line", rows, cols);
    if (rows <= 0 || cols <= 0) fail(line, "matrix dimensions must be positive");
    Matrix a(rows, cols);
    for (long j = 0; j < cols; ++j)
      for (long i = 0; i < rows; ++i) {
        if (!next_data_line(in, text, line)) fail(line + 1, "fewer values than rows*cols");
        double v = 0.0;
        parse_fields(text, line, "value", v);
        if (!std::isfinite(v)) fail(line, "non-finite value");
        a(i, j) = v;
      }
    if (next_data_line(in, text, line)) fail(line, "more values than rows*cols");
    return a;
  }

  long rows = 0, cols = 0, nnz = 0;
  parse_fields(text, line, "size line", rows, cols, nnz);
  if (rows <= 0 || cols <= 0) fail(line, "matrix dimensions must be positive");
  if (nnz <= 0) fail(line, "coordinate file has no entries");
  SparseEntries s;
  s.rows = rows;
  s.cols = cols;
  s.entries.reserve(static_cast<std::size_t>(nnz));
  std::set<std::pair<long, long>> seen;
  for (long k = 0; k < nnz; ++k) {
    if (!next_data_line(in, text, line)) fail(line + 1, "fewer entries than declared");
    long i = 0, j = 0;
    double v = 0.0;
    parse_fields(text, line, "entry", i, j, v);
    if (i < 1 || i > rows || j < 1 || j > cols) fail(line, "index out of range");
    if (!std::isfinite(v)) fail(line, "non-finite value");
    if (!seen.insert({i, j}).second) fail(line, "duplicate entry");
    s.entries.push_back({i - 1, j - 1, v});
  }
  if (next_data_line(in, text, line)) fail(line, "more entries than declared");
  return s;
}

MatrixMarketContent load_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  try {
    return read_matrix_market(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line());
  }
}

CompletionObjective load_completion(const std::string& path) {
  auto content = load_matrix_market(path);
  if (auto* s = std::get_if<SparseEntries>(&content)) {
    return CompletionObjective(s->rows, s->cols, std::move(s->entries));
  }
  throw ParseError("'" + path + "' is an array file; completion needs coordinate format", 1);
}

Matrix load_dense(const std::string& path) {
  auto content = load_matrix_market(path);
  if (auto* a = std::get_if<Matrix>(&content)) return std::move(*a);
  throw ParseError("'" + path + "' is a coordinate file; expected array format", 1);
}

void write_matrix_market(std::ostream& out, const Matrix& a) {
  out << "%%MatrixMarket matrix array real general\n" << a.rows() << ' ' << a.cols() << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) out << a(i, j) << '\n';
}

void write_matrix_market(std::ostream& out, const SparseEntries& s) {
  out << "%%MatrixMarket matrix coordinate real general\n"
      << s.rows << ' ' << s.cols << ' ' << s.entries.size() << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const Entry& e : s.entries) out << e.row + 1 << ' ' << e.col + 1 << ' ' << e.value << '\n';
}

namespace {

template <class T>
void save(const std::string& path, const T& data) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  write_matrix_market(out, data);
  if (!out) throw Error("write to '" + path + "' failed");
}

}  // namespace

void save_matrix_market(const std::string& path, const Matrix& a) { save(path, a); }
void save_matrix_market(const std::string& path, const SparseEntries& s) { save(path, s); }

}  // namespace fixedrank
