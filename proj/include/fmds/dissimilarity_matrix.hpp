#pragma once

#include "error.hpp"

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fmds {

struct TriangleCheck
{
  enum class State
  {
    Unchecked,
    Holds,
    Violated
  };
  State state = State::Unchecked;
  std::size_t violations = 0;
};

//! Symmetric n x n matrix of pairwise dissimilarities with zero diagonal.
//! Entries may be +inf (divergences between mutually singular densities).
struct DissimilarityMatrix
{
  std::vector<std::string> labels;
  Eigen::MatrixXd values;
  TriangleCheck metric_flag;

  std::size_t size() const { return labels.size(); }
  double operator()(std::size_t i, std::size_t j) const { return values(i, j); }
  bool all_finite() const { return values.allFinite(); }

  //! Checks the invariants; throws Error naming the first offending entry.
  void validate() const
  {
    const auto n = static_cast<Eigen::Index>(labels.size());
    if (values.rows() != n || values.cols() != n)
      throw Error("dissimilarity matrix shape does not match its labels");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (values(i, i) != 0.0)
        throw Error("dissimilarity matrix diagonal entry (" + labels[i] + ") is not 0");
      for (Eigen::Index j = 0; j < n; ++j) {
        double v = values(i, j);
        if (std::isnan(v) || v < 0.0)
          throw Error("dissimilarity matrix entry (" + labels[i] + ", " + labels[j] +
                      ") is negative or NaN");
        if (v != values(j, i))
          throw Error("dissimilarity matrix is not symmetric at (" + labels[i] + ", " +
                      labels[j] + ")");
      }
    }
  }
};

//! O(n^3) scan of d_ij <= d_ik + d_kj over all triples, with a relative
//! slack of 1e-12 for rounding.
inline TriangleCheck triangle_scan(const Eigen::MatrixXd& d)
{
  TriangleCheck out;
  const auto n = d.rows();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      for (Eigen::Index k = 0; k < n; ++k) {
        if (k == i || k == j)
          continue;
        double via = d(i, k) + d(k, j);
        if (d(i, j) > via * (1.0 + 1e-12) + 1e-300)
          ++out.violations;
      }
  out.state = out.violations ? TriangleCheck::State::Violated : TriangleCheck::State::Holds;
  return out;
}

inline std::string format_double(double v)
{
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const std::string& where)
{
  if (s == "inf" || s == "+inf" || s == "Inf" || s == "INF")
    return INFINITY;
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw ParseError(where + ": cannot parse number '" + s + "'");
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line)
{
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ','))
    out.push_back(cell);
  if (!line.empty() && line.back() == ',')
    out.emplace_back();
  return out;
}

//! Writes `id,<label1>,...,<labeln>` then one row per label with the full
//! symmetric matrix. Numbers use the shortest round-trip representation.
inline void write_matrix_csv(std::ostream& os, const DissimilarityMatrix& m)
{
  os << "id";
  for (const auto& l : m.labels)
    os << ',' << l;
  os << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    os << m.labels[i];
    for (std::size_t j = 0; j < m.size(); ++j)
      os << ',' << format_double(m.values(i, j));
    os << '\n';
  }
}

inline void write_matrix_csv(const std::string& path, const DissimilarityMatrix& m)
{
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw Error("cannot open '" + path + "' for writing");
  write_matrix_csv(os, m);
}

//! Strict reader: the header must start with `id`, labels must be unique and
//! repeated in the same order as row keys, and the matrix must satisfy the
//! DissimilarityMatrix invariants exactly.
inline DissimilarityMatrix read_matrix_csv(std::istream& is)
{
  std::string line;
  if (!std::getline(is, line))
    throw ParseError("matrix CSV: empty input");
  if (!line.empty() && line.back() == '\r')
    line.pop_back();
  auto header = split_csv_line(line);
  if (header.empty() || header[0] != "id")
    throw ParseError("matrix CSV line 1: header must start with 'id'");
  DissimilarityMatrix m;
  m.labels.assign(header.begin() + 1, header.end());
  const std::size_t n = m.labels.size();
  if (n == 0)
    throw ParseError("matrix CSV line 1: no labels");
  if (std::set<std::string>(m.labels.begin(), m.labels.end()).size() != n)
    throw ParseError("matrix CSV line 1: duplicate labels");
  m.values.resize(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string where = "matrix CSV line " + std::to_string(i + 2);
    if (!std::getline(is, line))
      throw ParseError(where + ": missing row");
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    auto cells = split_csv_line(line);
    if (cells.size() != n + 1)
      throw ParseError(where + ": expected " + std::to_string(n + 1) + " fields");
    if (cells[0] != m.labels[i])
      throw ParseError(where + ": row label '" + cells[0] + "' does not match header '" +
                       m.labels[i] + "'");
    for (std::size_t j = 0; j < n; ++j)
      m.values(i, j) = parse_double(cells[j + 1], where);
  }
  while (std::getline(is, line))
    if (!line.empty() && line != "\r")
      throw ParseError("matrix CSV: trailing content after " + std::to_string(n) + " rows");
  try {
    m.validate();
  } catch (const Error& e) {
    throw ParseError(std::string("matrix CSV: ") + e.what());
  }
  return m;
}

inline DissimilarityMatrix read_matrix_csv(const std::string& path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw Error("cannot open '" + path + "'");
  return read_matrix_csv(is);
}

} // namespace fmds
