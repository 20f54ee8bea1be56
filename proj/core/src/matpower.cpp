#include "opf/matpower.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace opf {

namespace {

// Strips % comments, keeping newlines so they can still separate matrix rows.
std::string strip_comments(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool in_comment = false;
  for (char ch : text) {
    if (ch == '\n') {
      in_comment = false;
      out.push_back(ch);
    } else if (in_comment) {
      continue;
    } else if (ch == '%') {
      in_comment = true;
    } else {
      out.push_back(ch);
    }
  }
  return out;
}

struct Scanner {
  const std::string& s;
  size_t pos = 0;

  bool eof() const { return pos >= s.size(); }

  void skip_space(bool stop_at_newline = false) {
    while (!eof()) {
      char c = s[pos];
      if (c == '\n' && stop_at_newline) return;
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else {
        return;
      }
    }
  }

  // Next identifier-ish token: [A-Za-z_][A-Za-z0-9_.]*
  std::string next_word() {
    skip_space();
    size_t start = pos;
    while (!eof()) {
      char c = s[pos];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.') {
        ++pos;
      } else {
        break;
      }
    }
    return s.substr(start, pos - start);
  }
};

double parse_real(const std::string& tok) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw NumericParse("not a real number: '" + tok + "'");
  }
  return v;
}

// Matrix body: rows separated by ';' or newline, values by spaces or commas,
// terminated by ']'. The scanner sits just past '['.
std::vector<std::vector<double>> parse_matrix(Scanner& sc, const std::string& field) {
  std::vector<std::vector<double>> rows;
  std::vector<double> row;
  std::string tok;
  auto flush_row = [&] {
    if (!row.empty()) {
      rows.push_back(std::move(row));
      row.clear();
    }
  };
  while (true) {
    sc.skip_space(/*stop_at_newline=*/true);
    if (sc.eof()) {
      throw MalformedMatrix("unterminated matrix in " + field);
    }
    char c = sc.s[sc.pos];
    if (c == '\n') {
      ++sc.pos;
      flush_row();
      continue;
    }
    if (c == ';') {
      ++sc.pos;
      flush_row();
      continue;
    }
    if (c == ',') {
      ++sc.pos;
      continue;
    }
    if (c == ']') {
      ++sc.pos;
      sc.skip_space();
      if (!sc.eof() && sc.s[sc.pos] == ';') ++sc.pos;
      flush_row();
      break;
    }
    // a numeric token
    size_t start = sc.pos;
    while (!sc.eof()) {
      char t = sc.s[sc.pos];
      if (std::isspace(static_cast<unsigned char>(t)) || t == ';' || t == ',' || t == ']') break;
      ++sc.pos;
    }
    row.push_back(parse_real(sc.s.substr(start, sc.pos - start)));
  }
  if (!rows.empty()) {
    size_t w = rows.front().size();
    for (size_t r = 1; r < rows.size(); ++r) {
      if (rows[r].size() != w) {
        throw MalformedMatrix(field + " row " + std::to_string(r) + " has " +
                              std::to_string(rows[r].size()) + " columns, expected " +
                              std::to_string(w));
      }
    }
  }
  return rows;
}

}  // namespace

RawCase parse_matpower(const std::string& text) {
  const std::string clean = strip_comments(text);
  Scanner sc{clean};
  RawCase c;

  // function <var> = <name>
  std::string var;
  while (!sc.eof()) {
    std::string w = sc.next_word();
    if (w.empty()) {
      ++sc.pos;
      continue;
    }
    if (w == "function") {
      var = sc.next_word();
      sc.skip_space();
      if (!sc.eof() && sc.s[sc.pos] == '=') {
        ++sc.pos;
        c.name = sc.next_word();
      } else {
        // no return value: "function casename"
        c.name = var;
        var = "mpc";
      }
      break;
    }
  }
  if (c.name.empty()) {
    throw MissingField("no 'function' header found");
  }

  bool saw_base = false, saw_bus = false, saw_gen = false, saw_branch = false,
       saw_gencost = false;
  const std::string prefix = var + ".";

  while (!sc.eof()) {
    sc.skip_space();
    if (sc.eof()) break;
    if (!(std::isalpha(static_cast<unsigned char>(sc.s[sc.pos])) || sc.s[sc.pos] == '_')) {
      ++sc.pos;
      continue;
    }
    size_t stmt_start = sc.pos;
    std::string w = sc.next_word();
    if (w.rfind(prefix, 0) != 0) continue;
    std::string field = w.substr(prefix.size());
    sc.skip_space();
    if (sc.eof() || sc.s[sc.pos] != '=') continue;
    ++sc.pos;
    sc.skip_space();

    bool is_matrix = !sc.eof() && sc.s[sc.pos] == '[';
    if (field == "baseMVA") {
      size_t start = sc.pos;
      while (!sc.eof() && sc.s[sc.pos] != ';') ++sc.pos;
      std::string tok = clean.substr(start, sc.pos - start);
      // trim
      while (!tok.empty() && std::isspace(static_cast<unsigned char>(tok.back()))) tok.pop_back();
      c.base_mva = parse_real(tok);
      saw_base = true;
      if (!sc.eof()) ++sc.pos;
    } else if (is_matrix && (field == "bus" || field == "gen" || field == "branch" ||
                             field == "gencost")) {
      ++sc.pos;  // consume '['
      auto rows = parse_matrix(sc, prefix + field);
      if (field == "bus") {
        c.bus_rows = std::move(rows);
        saw_bus = true;
      } else if (field == "gen") {
        c.gen_rows = std::move(rows);
        saw_gen = true;
      } else if (field == "branch") {
        c.branch_rows = std::move(rows);
        saw_branch = true;
      } else {
        c.gencost_rows = std::move(rows);
        saw_gencost = true;
      }
    } else {
      // Unknown assignment: keep verbatim up to its terminator.
      char open = sc.eof() ? ';' : sc.s[sc.pos];
      char close = (open == '[') ? ']' : (open == '{') ? '}' : ';';
      int depth = 0;
      while (!sc.eof()) {
        char t = sc.s[sc.pos];
        if (close != ';' && t == open) ++depth;
        if (t == close) {
          if (close == ';') {
            ++sc.pos;
            break;
          }
          if (--depth == 0) {
            ++sc.pos;
            sc.skip_space();
            if (!sc.eof() && sc.s[sc.pos] == ';') ++sc.pos;
            break;
          }
        }
        ++sc.pos;
      }
      std::string stmt = clean.substr(stmt_start, sc.pos - stmt_start);
      // collapse internal newlines so extras stay one line each
      std::replace(stmt.begin(), stmt.end(), '\n', ' ');
      c.extras.push_back(stmt);
    }
  }

  if (!saw_base) throw MissingField("no " + prefix + "baseMVA block");
  if (!saw_bus) throw MissingField("no " + prefix + "bus block");
  if (!saw_gen) throw MissingField("no " + prefix + "gen block");
  if (!saw_branch) throw MissingField("no " + prefix + "branch block");
  if (!saw_gencost) throw MissingField("no " + prefix + "gencost block");
  return c;
}

RawCase parse_matpower(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_matpower(ss.str());
}

RawCase read_case(const std::string& path) {
  std::ifstream f(path);
  if (!f.is_open()) {
    throw MissingField("could not open case file: " + path);
  }
  return parse_matpower(f);
}

std::vector<Diagnostic> validate_raw(const RawCase& c) {
  std::vector<Diagnostic> diags;
  auto add = [&](const std::string& table, int row, const std::string& rule,
                 const std::string& msg) {
    diags.push_back({table, row, rule, msg});
  };

  if (!(c.base_mva > 0)) {
    add("case", -1, "base_mva positive", "baseMVA must be > 0");
  }

  auto check_width = [&](const std::string& table, const std::vector<std::vector<double>>& rows,
                         size_t min_cols) {
    for (size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() < min_cols) {
        add(table, static_cast<int>(i), "row width",
            table + " row needs at least " + std::to_string(min_cols) + " columns");
      }
    }
  };
  check_width("bus", c.bus_rows, 13);
  check_width("gen", c.gen_rows, 10);
  check_width("branch", c.branch_rows, 13);
  check_width("gencost", c.gencost_rows, 4);

  std::set<long> bus_ids;
  for (const auto& row : c.bus_rows) {
    if (!row.empty()) bus_ids.insert(static_cast<long>(row[col::BUS_I]));
  }
  for (size_t i = 0; i < c.gen_rows.size(); ++i) {
    const auto& row = c.gen_rows[i];
    if (!row.empty() && !bus_ids.count(static_cast<long>(row[col::GEN_BUS]))) {
      add("gen", static_cast<int>(i), "endpoint exists",
          "generator references unknown bus " +
              std::to_string(static_cast<long>(row[col::GEN_BUS])));
    }
  }
  for (size_t i = 0; i < c.branch_rows.size(); ++i) {
    const auto& row = c.branch_rows[i];
    if (row.size() < 2) continue;
    for (int endc : {col::F_BUS, col::T_BUS}) {
      if (!bus_ids.count(static_cast<long>(row[endc]))) {
        add("branch", static_cast<int>(i), "endpoint exists",
            "branch references unknown bus " + std::to_string(static_cast<long>(row[endc])));
      }
    }
  }

  if (c.gencost_rows.size() != c.gen_rows.size()) {
    add("gencost", -1, "gencost count",
        "expected one cost row per generator: " + std::to_string(c.gencost_rows.size()) +
            " cost rows vs " + std::to_string(c.gen_rows.size()) + " generators");
  }
  for (size_t i = 0; i < c.gencost_rows.size(); ++i) {
    const auto& row = c.gencost_rows[i];
    if (row.size() < 4) continue;
    int model = static_cast<int>(row[col::MODEL]);
    int ncost = static_cast<int>(row[col::NCOST]);
    if (model != 2) {
      add("gencost", static_cast<int>(i), "cost model polynomial",
          "only polynomial costs (MODEL = 2) are supported");
      continue;
    }
    if (ncost < 1 || ncost > 3) {
      add("gencost", static_cast<int>(i), "ncost range", "NCOST must be 1, 2 or 3");
    }
    if (row.size() < static_cast<size_t>(4 + ncost)) {
      add("gencost", static_cast<int>(i), "row width", "cost row shorter than NCOST promises");
    }
  }
  return diags;
}

namespace {

std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_matrix(std::ostream& os, const std::string& field,
                  const std::vector<std::vector<double>>& rows) {
  os << field << " = [\n";
  for (const auto& row : rows) {
    os << '\t';
    for (size_t j = 0; j < row.size(); ++j) {
      if (j) os << '\t';
      os << fmt_real(row[j]);
    }
    os << ";\n";
  }
  os << "];\n\n";
}

}  // namespace

std::string write_matpower(const RawCase& c) {
  std::ostringstream os;
  os << "function mpc = " << c.name << "\n";
  os << "mpc.baseMVA = " << fmt_real(c.base_mva) << ";\n\n";
  write_matrix(os, "mpc.bus", c.bus_rows);
  write_matrix(os, "mpc.gen", c.gen_rows);
  write_matrix(os, "mpc.gencost", c.gencost_rows);
  write_matrix(os, "mpc.branch", c.branch_rows);
  for (const auto& extra : c.extras) {
    os << extra << "\n";
  }
  return os.str();
}

}  // namespace opf
