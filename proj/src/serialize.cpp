#include "hfine/serialize.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace hfine {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("number formatting failed");
  return std::string(buf, ptr);
}

void write_entries(std::ostream& os, const Matrix& m) {
  os << "row,col,re,im\n";
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const Complex v = m(r, c);
      if (v == Complex(0.0, 0.0)) continue;
      os << r << ',' << c << ',' << format_double(v.real()) << ',' << format_double(v.imag())
         << '\n';
    }
}

Matrix read_entries(std::istream& is, Eigen::Index n) {
  std::string line;
  if (!std::getline(is, line) || line != "row,col,re,im")
    throw Error("operator csv: missing entry header");
  Matrix m = Matrix::Zero(n, n);
  while (std::getline(is, line)) {
    if (line.empty()) break;
    std::istringstream ls(line);
    std::string cell;
    long long r, c;
    double re, im;
    std::getline(ls, cell, ',');
    r = std::stoll(cell);
    std::getline(ls, cell, ',');
    c = std::stoll(cell);
    std::getline(ls, cell, ',');
    re = std::stod(cell);
    std::getline(ls, cell, ',');
    im = std::stod(cell);
    if (r < 0 || r >= n || c < 0 || c >= n) throw Error("operator csv: index out of range");
    m(r, c) = Complex(re, im);
  }
  return m;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, sep)) out.push_back(item);
  return out;
}

}  // namespace

void write_operator_csv(std::ostream& os, const Operator& op) {
  os << "# hfine operator, dim=" << op.dim() << ", stacking=column-major, labels=";
  const auto& labels = op.basis->labels();
  for (std::size_t i = 0; i < labels.size(); ++i) os << (i ? "|" : "") << labels[i];
  os << '\n';
  write_entries(os, op.mat);
}

std::string operator_to_csv(const Operator& op) {
  std::ostringstream os;
  write_operator_csv(os, op);
  return os.str();
}

Operator read_operator_csv(std::istream& is) {
  std::string header;
  if (!std::getline(is, header) || header.rfind("# hfine operator", 0) != 0)
    throw Error("operator csv: bad header");
  const auto dim_pos = header.find("dim=");
  const auto labels_pos = header.find("labels=");
  if (dim_pos == std::string::npos || labels_pos == std::string::npos)
    throw Error("operator csv: header misses dim/labels");
  const int d = std::stoi(header.substr(dim_pos + 4));
  auto labels = split(header.substr(labels_pos + 7), '|');
  if (static_cast<int>(labels.size()) != d) throw Error("operator csv: label count mismatch");
  return Operator(make_basis(std::move(labels)), read_entries(is, d));
}

void write_superoperator_csv(std::ostream& os, const Superoperator& sup) {
  os << "# hfine superoperator, dim=" << sup.dim
     << ", stacking=column-major (vec(X)[c*d+r]=X(r,c))\n";
  write_entries(os, sup.mat);
}

Superoperator read_superoperator_csv(std::istream& is) {
  std::string header;
  if (!std::getline(is, header) || header.rfind("# hfine superoperator", 0) != 0)
    throw Error("superoperator csv: bad header");
  const auto dim_pos = header.find("dim=");
  if (dim_pos == std::string::npos) throw Error("superoperator csv: header misses dim");
  const int d = std::stoi(header.substr(dim_pos + 4));
  return Superoperator(d, read_entries(is, static_cast<Eigen::Index>(d) * d));
}

}  // namespace hfine
