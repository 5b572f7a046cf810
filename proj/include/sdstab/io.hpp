#pragma once

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sdstab/certify.hpp"
#include "sdstab/integrate.hpp"

namespace sdstab {

struct IoError : Error {
  using Error::Error;
};

namespace detail {

class SystemFileParser {
 public:
  explicit SystemFileParser(std::string_view text) : text_(text) {}

  SystemDef run() {
    std::size_t line_no = 0, pos = 0;
    while (pos <= text_.size()) {
      std::size_t end = text_.find('\n', pos);
      if (end == std::string_view::npos) end = text_.size();
      ++line_no;
      parse_line(text_.substr(pos, end - pos), line_no);
      pos = end + 1;
    }
    for (const char* key : {"dim", "f", "g", "V"})
      if (!seen_.count(key)) throw ParseError(std::string("missing key '") + key + "'", line_no, 1);
    check_count("f", f_);
    check_count("g", g_);
    auto parse_all = [this](const std::vector<Item>& items) {
      std::vector<Expr> out;
      for (const auto& it : items) out.push_back(simplify(parse_item(it)));
      return out;
    };
    return SystemDef(VectorField(parse_all(f_), dim_), VectorField(parse_all(g_), dim_),
                     ScalarField(simplify(parse_item(V_)), dim_));
  }

 private:
  struct Item {
    std::string text;
    std::size_t line = 0, column = 0;
  };

  struct Cursor {
    std::string_view s;
    std::size_t line;
    std::size_t i = 0;

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, line, i + 1); }
    void skip_ws() {
      while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    }
    bool at_end() {
      skip_ws();
      return i >= s.size();
    }
    void expect(char c) {
      skip_ws();
      if (i >= s.size() || s[i] != c) fail(std::string("expected '") + c + "'");
      ++i;
    }
    std::string identifier() {
      skip_ws();
      std::size_t start = i;
      while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
      if (start == i) fail("expected a name");
      return std::string(s.substr(start, i - start));
    }
    Item quoted() {
      skip_ws();
      if (i >= s.size() || s[i] != '"') fail("expected a quoted expression");
      std::size_t start = ++i;
      while (i < s.size() && s[i] != '"') ++i;
      if (i >= s.size()) fail("unterminated string");
      Item it{std::string(s.substr(start, i - start)), line, start + 1};
      ++i;
      return it;
    }
  };

  static std::string_view strip_comment(std::string_view line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_string = !in_string;
      if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
  }

  void parse_line(std::string_view raw, std::size_t line_no) {
    Cursor c{strip_comment(raw), line_no};
    if (c.at_end()) return;
    const std::size_t key_col = c.i + 1;
    std::string key = c.identifier();
    if (key == "param") {
      std::string name = c.identifier();
      if (name == "sin" || name == "cos" || name == "exp" || name == "ln" || name == "param" ||
          (name.size() > 1 && name[0] == 'x' && std::isdigit(static_cast<unsigned char>(name[1]))))
        throw ParseError("parameter name '" + name + "' is reserved", line_no, key_col);
      c.expect('=');
      c.skip_ws();
      std::string value(c.s.substr(c.i));
      while (!value.empty() && std::isspace(static_cast<unsigned char>(value.back()))) value.pop_back();
      if (value.empty()) c.fail("empty parameter value");
      params_[name] = "(" + substitute(value) + ")";
      return;
    }
    if (key != "dim" && key != "f" && key != "g" && key != "V")
      throw ParseError("unknown key '" + key + "'", line_no, key_col);
    if (!seen_.insert(key).second) throw ParseError("duplicate key '" + key + "'", line_no, key_col);
    c.expect('=');
    if (key == "dim") {
      c.skip_ws();
      std::size_t start = c.i;
      while (c.i < c.s.size() && std::isdigit(static_cast<unsigned char>(c.s[c.i]))) ++c.i;
      if (start == c.i) c.fail("expected a positive integer");
      dim_ = std::stoi(std::string(c.s.substr(start, c.i - start)));
      if (dim_ < 1 || dim_ > 64) throw ParseError("dim must be in 1..64", line_no, start + 1);
    } else if (key == "V") {
      V_ = c.quoted();
    } else {
      auto& list = key == "f" ? f_ : g_;
      c.expect('[');
      c.skip_ws();
      if (c.i < c.s.size() && c.s[c.i] == ']') {
        ++c.i;
      } else {
        for (;;) {
          list.push_back(c.quoted());
          c.skip_ws();
          if (c.i < c.s.size() && c.s[c.i] == ',') {
            ++c.i;
            continue;
          }
          c.expect(']');
          break;
        }
      }
    }
    if (!c.at_end()) c.fail("unexpected trailing text");
  }

  std::string substitute(const std::string& s) const {
    std::string out;
    for (std::size_t i = 0; i < s.size();) {
      if (std::isalpha(static_cast<unsigned char>(s[i])) || s[i] == '_') {
        std::size_t j = i;
        while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
        std::string word = s.substr(i, j - i);
        auto it = params_.find(word);
        out += it == params_.end() ? word : it->second;
        i = j;
      } else {
        out += s[i++];
      }
    }
    return out;
  }

  Expr parse_item(const Item& it) const {
    const std::string text = substitute(it.text);
    try {
      return parse(text, dim_);
    } catch (const ParseError& e) {
      const std::string& msg = e.message;
      if (text == it.text) throw ParseError(msg, it.line, it.column + e.column - 1);
      throw ParseError(msg + " (after parameter substitution)", it.line, it.column);
    }
  }

  void check_count(const char* name, const std::vector<Item>& items) const {
    if (static_cast<int>(items.size()) != dim_)
      throw DimensionError(std::string(name) + " has " + std::to_string(items.size()) + " components but dim = " +
                           std::to_string(dim_));
  }

  std::string_view text_;
  std::set<std::string> seen_;
  std::map<std::string, std::string> params_;
  int dim_ = 0;
  std::vector<Item> f_, g_;
  Item V_;
};

}  // namespace detail

/// Parses the key = value system format (dim, f, g, V, optional `param NAME = TEXT` lines, # comments).
inline SystemDef parse_system(std::string_view text) { return detail::SystemFileParser(text).run(); }

inline SystemDef load_system(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open system file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_system(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(e.message + " in " + path.string(), e.line, e.column);
  }
}

// ---- CSV ------------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v == 0.0 ? 0.0 : v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

/// Splits one CSV record, honouring double quotes.
inline std::vector<std::string> csv_split(std::string_view line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else if (c != '\r') {
      out.back() += c;
    }
  }
  return out;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj, int dim) {
  os << "t";
  for (int i = 1; i <= dim; ++i) os << ",x" << i;
  os << ",V,segment_index,is_checkpoint\n";
  for (const auto& s : traj.samples) {
    os << format_double(s.t);
    for (double v : s.x) os << ',' << format_double(v);
    os << ',' << format_double(s.V) << ',' << s.segment << ',' << (s.checkpoint ? 1 : 0) << '\n';
  }
}

inline std::vector<Sample> read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("empty trajectory file");
  const auto header = csv_split(line);
  if (header.size() < 5 || header[0] != "t") throw IoError("not a trajectory file");
  const std::size_t dim = header.size() - 4;
  std::vector<Sample> out;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    auto f = csv_split(line);
    if (f.size() != header.size()) throw IoError("row " + std::to_string(row) + " has the wrong number of fields");
    try {
      Sample s;
      s.t = std::stod(f[0]);
      for (std::size_t i = 0; i < dim; ++i) s.x.push_back(std::stod(f[1 + i]));
      s.V = std::stod(f[1 + dim]);
      s.segment = std::stoi(f[2 + dim]);
      s.checkpoint = f[3 + dim] == "1";
      out.push_back(std::move(s));
    } catch (const std::logic_error&) {
      throw IoError("row " + std::to_string(row) + " is not numeric");
    }
  }
  return out;
}

inline void write_certificate_header(std::ostream& os, int dim) {
  for (int i = 1; i <= dim; ++i) os << 'x' << i << ',';
  os << "case,N,gV,fV,witness_name,witness_value\n";
}

/// One row per witness.
inline void write_certificate_rows(std::ostream& os, const EvalPoint& x, const Certificate& c) {
  std::string prefix;
  for (std::size_t i = 0; i < static_cast<std::size_t>(x.dim()); ++i) prefix += format_double(x[i]) + ',';
  prefix += std::string(to_string(c.kind)) + ',' + std::to_string(c.N) + ',';
  prefix += format_double(c.witness("gV").value_or(0.0)) + ',';
  auto fV = c.witness("fV");
  prefix += (fV ? format_double(*fV) : std::string()) + ',';
  for (const auto& w : c.witnesses) os << prefix << csv_field(w.name) << ',' << format_double(w.value) << '\n';
}

inline void write_grid_csv(std::ostream& os, const std::vector<GridCertificate>& grid, int dim) {
  write_certificate_header(os, dim);
  for (const auto& gc : grid) {
    if (gc.certificate) {
      write_certificate_rows(os, gc.point, *gc.certificate);
      continue;
    }
    for (std::size_t i = 0; i < static_cast<std::size_t>(dim); ++i) os << format_double(gc.point[i]) << ',';
    os << "skipped-origin,,,,,\n";
  }
}

// ---- plot scripts -----------------------------------------------------------

inline std::string trajectory_plot_script(const std::string& csv, int dim, const std::string& png) {
  std::ostringstream s;
  s << "set datafile separator ','\nset terminal pngcairo size 900,700\nset output '" << png << "'\n"
    << "set multiplot layout 2,1\nset xlabel 't'\nset ylabel 'V'\nset logscale y\n"
    << "plot '" << csv << "' using 1:" << dim + 2 << " with lines title 'V', \\\n"
    << "     '' using 1:($" << dim + 4 << "==1 ? $" << dim + 2 << " : 1/0) with points pt 7 ps 0.4 title 'checkpoints'\n"
    << "unset logscale y\nset ylabel 'state'\nplot ";
  for (int i = 1; i <= dim; ++i) s << (i > 1 ? ", \\\n     " : "") << "'" << csv << "' using 1:" << i + 1 << " with lines title 'x" << i << "'";
  s << "\nunset multiplot\n";
  return s.str();
}

inline std::string grid_plot_script(const std::string& csv, const std::string& png) {
  std::ostringstream s;
  s << "set datafile separator ','\nset terminal pngcairo size 800,800\nset output '" << png << "'\n"
    << "set xlabel 'x1'\nset ylabel 'x2'\nset key outside\n"
    << "plot ";
  const char* cases[] = {"Transversal", "ArtsteinSontag", "P1", "P2", "P3", "P4", "Inconclusive"};
  for (int k = 0; k < 7; ++k)
    s << (k ? ", \\\n     " : "") << "'" << csv << "' using 1:(strcol(3) eq '" << cases[k]
      << "' && strcol(7) eq 'gV' ? $2 : 1/0) with points pt 7 title '" << cases[k] << "'";
  s << "\n";
  return s.str();
}

inline std::string series_plot_script(const std::string& csv, const std::string& png, const std::string& xlabel,
                                      const std::string& ylabel, bool loglog) {
  std::ostringstream s;
  s << "set datafile separator ','\nset terminal pngcairo size 800,600\nset output '" << png << "'\n"
    << "set xlabel '" << xlabel << "'\nset ylabel '" << ylabel << "'\n";
  if (loglog) s << "set logscale xy\n";
  s << "plot for [c=2:*] '" << csv << "' using 1:c with linespoints title columnheader(c)\n";
  return s.str();
}

}  // namespace sdstab
