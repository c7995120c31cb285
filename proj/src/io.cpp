#include "pwabs/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "pwabs/error.hpp"

namespace pwabs {

Json to_json(const Vec& v) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

Json to_json(const Mat& m) {
  Json j = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) j.push_back(to_json(Vec(m.row(r).transpose())));
  return j;
}

Vec vec_from_json(const Json& j) {
  if (!j.is_array()) throw FormatError("expected a numeric array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw FormatError("expected a number");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

Mat mat_from_json(const Json& j) {
  if (!j.is_array()) throw FormatError("expected an array of rows");
  if (j.empty()) return Mat(0, 0);
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Mat m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Vec row = vec_from_json(j[r]);
    if (row.size() != cols) throw FormatError("ragged matrix");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

Json polytope_to_json(const Polytope& P) {
  Json H = Json::array();
  for (int r = 0; r < P.rows(); ++r) H.push_back(to_json(Vec(P.H().row(r).transpose())));
  return Json{{"H", H}, {"K", to_json(P.K())}, {"dim", P.dim()}};
}

Polytope polytope_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("H") || !j.contains("K")) throw FormatError("polytope needs H and K");
  Mat H = mat_from_json(j.at("H"));
  if (H.rows() == 0) {
    const int dim = j.value("dim", 0);
    H = Mat(0, dim);
  }
  return Polytope(std::move(H), vec_from_json(j.at("K")));
}

Json region_to_json(const Region& R) {
  Json pieces = Json::array();
  for (const auto& p : R.pieces()) pieces.push_back(polytope_to_json(p));
  return Json{{"pieces", pieces}, {"dim", R.dim()}};
}

Region region_from_json(const Json& j, int dim) {
  if (!j.is_object() || !j.contains("pieces")) throw FormatError("region needs pieces");
  Region out(j.value("dim", dim));
  for (const auto& p : j.at("pieces")) {
    Polytope piece = polytope_from_json(p);
    if (out.dim() == 0) out = Region(piece.dim());
    out.append(std::move(piece));
  }
  return out;
}

Json model_to_json(const PwaModel& M) {
  Json modes = Json::array();
  for (const auto& m : M.modes())
    modes.push_back(Json{{"A", to_json(m.A)}, {"b", to_json(m.b)}, {"region", polytope_to_json(m.region)}});
  return Json{{"modes", modes}, {"domain", polytope_to_json(M.domain())}, {"noise_sigma", M.noise_sigma()}};
}

PwaModel model_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("modes") || !j.contains("domain")) throw FormatError("model needs modes and domain");
  std::vector<PwaMode> modes;
  for (const auto& m : j.at("modes"))
    modes.push_back(PwaMode{mat_from_json(m.at("A")), vec_from_json(m.at("b")), polytope_from_json(m.at("region"))});
  return PwaModel(std::move(modes), polytope_from_json(j.at("domain")), j.value("noise_sigma", 0.0));
}

Json atoms_to_json(std::span<const Atom> atoms) {
  Json out = Json::array();
  for (const auto& a : atoms) out.push_back(Json{{"name", a.name}, {"h", to_json(a.h)}, {"k", a.k}});
  return out;
}

std::vector<Atom> atoms_from_json(const Json& j) {
  if (!j.is_array()) throw FormatError("atoms file must be an array");
  std::vector<Atom> out;
  for (const auto& a : j) {
    if (!a.contains("name") || !a.contains("h") || !a.contains("k")) throw FormatError("atom needs name, h and k");
    out.push_back(Atom{a.at("name").get<std::string>(), vec_from_json(a.at("h")), a.at("k").get<double>()});
  }
  return out;
}

Json ts_to_json(const FiniteTS& ts) {
  Json states = Json::array();
  int dim = 0;
  for (const auto& s : ts.states)
    if (s.region.dim() > 0) dim = s.region.dim();
  for (const auto& s : ts.states)
    states.push_back(Json{{"region", region_to_json(s.region)},
                          {"obs", Json{{"mode", s.obs.mode}, {"letter", s.obs.letter}, {"sink", s.obs.sink}}}});
  Json transitions = Json::array();
  for (const auto& [a, b] : ts.edges()) transitions.push_back(Json::array({a, b}));
  return Json{{"dim", dim}, {"states", states}, {"transitions", transitions}};
}

FiniteTS ts_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("states") || !j.contains("transitions"))
    throw FormatError("transition system needs states and transitions");
  const int dim = j.value("dim", 0);
  FiniteTS ts;
  for (const auto& s : j.at("states")) {
    TsState st;
    st.region = region_from_json(s.at("region"), dim);
    const auto& o = s.at("obs");
    st.obs.mode = o.value("mode", -1);
    st.obs.letter = o.value("letter", Letter{0});
    st.obs.sink = o.value("sink", false);
    ts.states.push_back(std::move(st));
  }
  ts.succ.assign(ts.states.size(), {});
  for (const auto& e : j.at("transitions")) {
    if (!e.is_array() || e.size() != 2) throw FormatError("transition must be a pair");
    const int a = e[0].get<int>();
    const int b = e[1].get<int>();
    if (a < 0 || b < 0 || a >= ts.size() || b >= ts.size()) throw FormatError("transition index out of range");
    ts.succ[static_cast<std::size_t>(a)].push_back(b);
  }
  for (auto& s : ts.succ) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
  }
  return ts;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

std::string dataset_to_csv(const Dataset& d, const std::vector<int>* labels) {
  const int n = d.dim();
  std::ostringstream os;
  for (int i = 0; i < n; ++i) os << (i ? "," : "") << 'x' << i + 1;
  for (int i = 0; i < n; ++i) os << ",y" << i + 1;
  if (labels) os << ",mode";
  os << '\n';
  for (std::size_t k = 0; k < d.size(); ++k) {
    for (int i = 0; i < n; ++i) os << (i ? "," : "") << fmt(d.xs[k](i));
    for (int i = 0; i < n; ++i) os << ',' << fmt(d.ys[k](i));
    if (labels) os << ',' << (*labels)[k];
    os << '\n';
  }
  return os.str();
}

Dataset dataset_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw FormatError("empty dataset file");
  const auto header = split(line, ',');
  int n = 0;
  for (const auto& h : header)
    if (!h.empty() && h[0] == 'x') ++n;
  if (n == 0) throw FormatError("dataset header has no x columns");
  if (header.size() < static_cast<std::size_t>(2 * n)) throw FormatError("dataset header has fewer y than x columns");
  Dataset d;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size())
      throw FormatError("dataset row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                        " cells, header has " + std::to_string(header.size()));
    Vec x(n), y(n);
    try {
      for (int i = 0; i < n; ++i) {
        x(i) = std::stod(cells[static_cast<std::size_t>(i)]);
        y(i) = std::stod(cells[static_cast<std::size_t>(n + i)]);
      }
    } catch (const std::exception&) {
      throw FormatError("dataset row " + std::to_string(row) + " has a non-numeric cell");
    }
    d.push_back(std::move(x), std::move(y));
  }
  return d;
}

std::string partition_csv(const FiniteTS& ts) {
  std::ostringstream os;
  os << "state,piece,mode,letter,H,K\n";
  for (int q = 0; q < ts.size(); ++q) {
    const auto& s = ts.states[static_cast<std::size_t>(q)];
    int idx = 0;
    for (const auto& p : s.region.pieces()) {
      os << q << ',' << idx++ << ',' << s.obs.mode << ',' << s.obs.letter << ',';
      for (int r = 0; r < p.rows(); ++r) {
        if (r) os << ';';
        for (int c = 0; c < p.dim(); ++c) os << (c ? " " : "") << fmt(p.H()(r, c));
      }
      os << ',';
      for (int r = 0; r < p.rows(); ++r) os << (r ? " " : "") << fmt(p.K()(r));
      os << '\n';
    }
  }
  return os.str();
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Json read_json_file(const std::filesystem::path& path) {
  try {
    return Json::parse(read_text_file(path));
  } catch (const Json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

void write_json_file(const std::filesystem::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

}  // namespace pwabs
