#include "signflow/field_io.hpp"

#include "signflow/format.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

namespace signflow {

namespace {

double parse_double(const std::string& tok, const std::string& path) {
  const char* begin = tok.c_str();
  const char* end = begin + tok.size();
  double value = 0.0;
  auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end)
    throw FieldIoError(path + ": malformed number '" + tok + "'");
  return value;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

void write_field(const std::string& path, const Field& u) {
  std::ofstream out(path);
  if (!out) throw FieldIoError(path + ": cannot open for writing");
  const Grid& g = u.grid();
  out << "# grid d=" << g.dimension() << " n=" << g.n() << "\n";
  const int n = g.n();
  const int rows = g.dimension() == 1 ? 1 : n;
  auto vals = u.values();
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < n; ++c) {
      if (c) out << ',';
      out << format_double(vals[static_cast<std::size_t>(r) * n + c]);
    }
    out << '\n';
  }
  if (!out) throw FieldIoError(path + ": write failed");
}

Field read_field(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FieldIoError(path + ": cannot open for reading");
  std::string header;
  if (!std::getline(in, header)) throw FieldIoError(path + ": empty file");
  int d = 0, n = 0;
  {
    std::istringstream hs(header);
    std::string hash, word, dtok, ntok;
    hs >> hash >> word >> dtok >> ntok;
    bool ok = hash == "#" && word == "grid" && dtok.rfind("d=", 0) == 0 &&
              ntok.rfind("n=", 0) == 0;
    if (ok) {
      try {
        d = std::stoi(dtok.substr(2));
        n = std::stoi(ntok.substr(2));
      } catch (const std::exception&) {
        ok = false;
      }
    }
    std::string rest;
    if (hs >> rest) ok = false;
    if (!ok) throw FieldIoError(path + ": bad header line '" + header + "'");
  }
  Grid g(d, n);
  std::vector<double> values;
  values.reserve(g.node_count());
  const int rows = d == 1 ? 1 : n;
  std::string line;
  for (int r = 0; r < rows; ++r) {
    if (!std::getline(in, line))
      throw FieldIoError(path + ": expected " + std::to_string(rows) +
                         " data rows, found " + std::to_string(r));
    std::istringstream ls(line);
    std::string tok;
    int cols = 0;
    while (std::getline(ls, tok, ',')) {
      values.push_back(parse_double(trim(tok), path));
      ++cols;
    }
    if (cols != n)
      throw FieldIoError(path + ": row " + std::to_string(r + 1) + " has " +
                         std::to_string(cols) + " columns, expected " + std::to_string(n));
  }
  while (std::getline(in, line))
    if (!trim(line).empty()) throw FieldIoError(path + ": trailing content after data rows");
  return Field(g, std::move(values));
}

void write_pgm(const std::string& path, const Field& u) {
  std::ofstream out(path);
  if (!out) throw FieldIoError(path + ": cannot open for writing");
  const Grid& g = u.grid();
  const int n = g.n();
  const int rows = g.dimension() == 1 ? 1 : n;
  auto vals = u.values();
  double lo = vals[0], hi = vals[0];
  for (double v : vals) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  out << "P2\n" << n << ' ' << rows << "\n65535\n";
  const double span = hi - lo;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < n; ++c) {
      int level;
      if (span <= 0.0) {
        level = 32768;
      } else {
        double t = (vals[static_cast<std::size_t>(r) * n + c] - lo) / span;
        level = static_cast<int>(std::lround(t * 65535.0));
        level = std::clamp(level, 0, 65535);
      }
      if (c) out << ' ';
      out << level;
    }
    out << '\n';
  }
  if (!out) throw FieldIoError(path + ": write failed");
}

}  // namespace signflow
