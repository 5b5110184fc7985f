#include "netwm/scenario.h"

#include <cctype>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace netwm {
namespace {

using Json = nlohmann::json;

// Line bookkeeping for the SAX pass: `line` is the current line and
// `token_line` the line of the last non-blank character the lexer consumed,
// which is the last character of the token that triggered an event.
struct LineState {
  int line = 1;
  int token_line = 1;
};

class CountingIterator {
 public:
  using iterator_category = std::input_iterator_tag;
  using value_type = char;
  using difference_type = std::ptrdiff_t;
  using pointer = const char*;
  using reference = const char&;

  CountingIterator(const char* p, LineState* state) : p_(p), state_(state) {}

  reference operator*() const { return *p_; }
  CountingIterator& operator++() {
    const char c = *p_;
    if (c == '\n') {
      ++state_->line;
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      state_->token_line = state_->line;
    }
    ++p_;
    return *this;
  }
  CountingIterator operator++(int) {
    CountingIterator old = *this;
    ++*this;
    return old;
  }
  bool operator==(const CountingIterator& o) const { return p_ == o.p_; }
  bool operator!=(const CountingIterator& o) const { return p_ != o.p_; }

 private:
  const char* p_;
  LineState* state_;
};

// DOM builder that also remembers the line on which every value starts,
// keyed by JSON pointer.
class LineRecordingBuilder {
 public:
  using number_integer_t = Json::number_integer_t;
  using number_unsigned_t = Json::number_unsigned_t;
  using number_float_t = Json::number_float_t;
  using string_t = Json::string_t;
  using binary_t = Json::binary_t;

  LineRecordingBuilder(Json& root, const LineState& state,
                       std::map<std::string, int>& lines)
      : dom_(root), state_(state), lines_(lines) {}

  bool null() { record(); return dom_.null(); }
  bool boolean(bool v) { record(); return dom_.boolean(v); }
  bool number_integer(number_integer_t v) { record(); return dom_.number_integer(v); }
  bool number_unsigned(number_unsigned_t v) { record(); return dom_.number_unsigned(v); }
  bool number_float(number_float_t v, const string_t& s) {
    record();
    return dom_.number_float(v, s);
  }
  bool string(string_t& v) { record(); return dom_.string(v); }
  bool binary(binary_t& v) { record(); return dom_.binary(v); }
  bool start_object(std::size_t n) {
    frames_.push_back({false, 0, "", record()});
    return dom_.start_object(n);
  }
  bool key(string_t& k) {
    frames_.back().key = k;
    return dom_.key(k);
  }
  bool end_object() {
    frames_.pop_back();
    return dom_.end_object();
  }
  bool start_array(std::size_t n) {
    frames_.push_back({true, 0, "", record()});
    return dom_.start_array(n);
  }
  bool end_array() {
    frames_.pop_back();
    return dom_.end_array();
  }
  bool parse_error(std::size_t pos, const std::string& token,
                   const nlohmann::detail::exception& ex) {
    return dom_.parse_error(pos, token, ex);
  }

 private:
  struct Frame {
    bool array;
    std::size_t index;
    std::string key;
    std::string path;
  };

  std::string record() {
    std::string path;
    if (!frames_.empty()) {
      Frame& f = frames_.back();
      path = f.path + "/" + (f.array ? std::to_string(f.index++) : escape(f.key));
    }
    lines_.emplace(path, state_.token_line);
    return path;
  }

  static std::string escape(const std::string& key) {
    std::string out;
    for (char c : key) {
      if (c == '~') out += "~0";
      else if (c == '/') out += "~1";
      else out += c;
    }
    return out;
  }

  nlohmann::detail::json_sax_dom_parser<Json> dom_;
  const LineState& state_;
  std::map<std::string, int>& lines_;
  std::vector<Frame> frames_;
};

class Reader {
 public:
  Reader(std::string source, std::map<std::string, int> lines)
      : source_(std::move(source)), lines_(std::move(lines)) {}

  [[noreturn]] void fail(const std::string& ptr, const std::string& msg) const {
    const int line = line_of(ptr);
    throw ScenarioError(source_ + ":" + std::to_string(line) + ": " +
                            (ptr.empty() ? "/" : ptr) + ": " + msg,
                        line);
  }

  int line_of(std::string ptr) const {
    while (true) {
      const auto it = lines_.find(ptr);
      if (it != lines_.end()) return it->second;
      if (ptr.empty()) return 0;
      ptr.erase(ptr.rfind('/'));
    }
  }

  void object(const Json& v, const std::string& ptr,
              std::initializer_list<const char*> allowed) const {
    if (!v.is_object()) fail(ptr, "expected an object");
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& item : v.items()) {
      if (!keys.count(item.key())) fail(ptr + "/" + item.key(), "unknown key");
    }
  }

  const Json& member(const Json& obj, const std::string& ptr, const char* key) const {
    if (!obj.contains(key)) fail(ptr, std::string("missing key \"") + key + "\"");
    return obj.at(key);
  }

  double number(const Json& v, const std::string& ptr) const {
    if (!v.is_number()) fail(ptr, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(ptr, "number is not finite");
    return x;
  }

  long integer(const Json& v, const std::string& ptr, long min) const {
    if (!v.is_number_integer()) fail(ptr, "expected an integer");
    const long x = v.get<long>();
    if (x < min) fail(ptr, "must be at least " + std::to_string(min));
    return x;
  }

  std::uint64_t unsigned_integer(const Json& v, const std::string& ptr) const {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) fail(ptr, "must be nonnegative");
    fail(ptr, "expected an unsigned integer");
  }

  Vector vector(const Json& v, const std::string& ptr) const {
    if (!v.is_array()) fail(ptr, "expected an array of numbers");
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t k = 0; k < v.size(); ++k) {
      out(static_cast<Eigen::Index>(k)) = number(v[k], ptr + "/" + std::to_string(k));
    }
    return out;
  }

  Matrix matrix(const Json& v, const std::string& ptr) const {
    if (v.is_number()) return Matrix::Constant(1, 1, number(v, ptr));
    if (!v.is_array() || v.empty()) fail(ptr, "expected a non-empty array of rows");
    Matrix out;
    for (std::size_t r = 0; r < v.size(); ++r) {
      const std::string row_ptr = ptr + "/" + std::to_string(r);
      const Vector row = vector(v[r], row_ptr);
      if (r == 0) {
        if (row.size() == 0) fail(row_ptr, "rows must not be empty");
        out.resize(static_cast<Eigen::Index>(v.size()), row.size());
      } else if (row.size() != out.cols()) {
        fail(row_ptr, "row has " + std::to_string(row.size()) + " entries, expected " +
                          std::to_string(out.cols()));
      }
      out.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    return out;
  }

  std::vector<Matrix> matrices(const Json& v, const std::string& ptr) const {
    if (!v.is_array() || v.empty()) fail(ptr, "expected a non-empty array of matrices");
    std::vector<Matrix> out;
    for (std::size_t k = 0; k < v.size(); ++k) {
      out.push_back(matrix(v[k], ptr + "/" + std::to_string(k)));
    }
    return out;
  }

  void shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols,
             const std::string& ptr) const {
    if (m.rows() != rows || m.cols() != cols) {
      fail(ptr, "expected a " + std::to_string(rows) + "x" + std::to_string(cols) +
                    " matrix, got " + std::to_string(m.rows()) + "x" +
                    std::to_string(m.cols()));
    }
  }

  // Runs a library validation and re-anchors its error to ptr.
  template <typename F>
  void checked(const std::string& ptr, F&& f) const {
    try {
      f();
    } catch (const ScenarioError&) {
      throw;
    } catch (const Error& e) {
      fail(ptr, e.what());
    }
  }

 private:
  std::string source_;
  std::map<std::string, int> lines_;
};

PlantModel read_plant(const Reader& rd, const Json& v) {
  const std::string ptr = "/plant";
  rd.object(v, ptr, {"A", "B_blocks", "C_blocks", "sigma_W", "sigma_Z_blocks"});
  PlantModel m;
  m.a = rd.matrix(rd.member(v, ptr, "A"), ptr + "/A");
  const Eigen::Index p = m.a.rows();
  rd.shape(m.a, p, p, ptr + "/A");
  m.b_blocks = rd.matrices(rd.member(v, ptr, "B_blocks"), ptr + "/B_blocks");
  m.c_blocks = rd.matrices(rd.member(v, ptr, "C_blocks"), ptr + "/C_blocks");
  m.sigma_w = rd.matrix(rd.member(v, ptr, "sigma_W"), ptr + "/sigma_W");
  m.sigma_z_blocks = rd.matrices(rd.member(v, ptr, "sigma_Z_blocks"), ptr + "/sigma_Z_blocks");
  const std::size_t kappa = m.b_blocks.size();
  for (std::size_t i = 0; i < kappa; ++i) {
    const std::string at = "/" + std::to_string(i);
    if (m.b_blocks[i].rows() != p) {
      rd.fail(ptr + "/B_blocks" + at, "expected " + std::to_string(p) + " rows");
    }
  }
  if (m.c_blocks.size() != kappa) {
    rd.fail(ptr + "/C_blocks", "expected one block per input block (" +
                                   std::to_string(kappa) + ")");
  }
  if (m.sigma_z_blocks.size() != kappa) {
    rd.fail(ptr + "/sigma_Z_blocks", "expected " + std::to_string(kappa) + " blocks");
  }
  for (std::size_t j = 0; j < kappa; ++j) {
    const std::string at = "/" + std::to_string(j);
    if (m.c_blocks[j].cols() != p) {
      rd.fail(ptr + "/C_blocks" + at, "expected " + std::to_string(p) + " columns");
    }
    const Eigen::Index mj = m.c_blocks[j].rows();
    rd.shape(m.sigma_z_blocks[j], mj, mj, ptr + "/sigma_Z_blocks" + at);
    rd.checked(ptr + "/sigma_Z_blocks" + at,
               [&] { require_covariance(m.sigma_z_blocks[j], mj, "covariance"); });
  }
  rd.shape(m.sigma_w, p, p, ptr + "/sigma_W");
  rd.checked(ptr + "/sigma_W", [&] { require_covariance(m.sigma_w, p, "covariance"); });
  rd.checked(ptr, [&] { m.validate(); });
  return m;
}

ScenarioGains read_gains(const Reader& rd, const Json& v, const PlantModel& plant) {
  const std::string ptr = "/gains";
  rd.object(v, ptr, {"K_blocks", "L_blocks", "sigma_E_blocks"});
  ScenarioGains g;
  const std::size_t kappa = plant.b_blocks.size();
  const Eigen::Index p = plant.a.rows();
  auto blocks = [&](const char* key, auto expected_shape) {
    std::vector<Matrix> out;
    if (!v.contains(key)) return out;
    const std::string at = ptr + "/" + key;
    out = rd.matrices(v.at(key), at);
    if (out.size() != kappa) rd.fail(at, "expected " + std::to_string(kappa) + " blocks");
    for (std::size_t i = 0; i < kappa; ++i) {
      const auto [rows, cols] = expected_shape(static_cast<int>(i));
      rd.shape(out[i], rows, cols, at + "/" + std::to_string(i));
    }
    return out;
  };
  g.k_blocks = blocks("K_blocks", [&](int i) {
    return std::pair<Eigen::Index, Eigen::Index>(plant.inputs(i), p);
  });
  g.l_blocks = blocks("L_blocks", [&](int j) {
    return std::pair<Eigen::Index, Eigen::Index>(p, plant.outputs(j));
  });
  g.sigma_e_blocks = blocks("sigma_E_blocks", [&](int i) {
    return std::pair<Eigen::Index, Eigen::Index>(plant.inputs(i), plant.inputs(i));
  });
  for (std::size_t i = 0; i < g.sigma_e_blocks.size(); ++i) {
    rd.checked(ptr + "/sigma_E_blocks/" + std::to_string(i), [&] {
      require_covariance(g.sigma_e_blocks[i], g.sigma_e_blocks[i].rows(), "covariance");
    });
  }
  if (g.complete()) rd.checked(ptr, [&] { g.gain_set().validate(plant); });
  return g;
}

DetectorConfig read_detector(const Reader& rd, const Json& v, int kappa) {
  const std::string ptr = "/detector";
  rd.object(v, ptr,
            {"ell", "alpha", "calibration_windows", "coefficient_variant",
             "wishart_argument", "tau"});
  DetectorConfig d;
  if (v.contains("ell")) d.ell = static_cast<int>(rd.integer(v.at("ell"), ptr + "/ell", 1));
  if (v.contains("alpha")) {
    d.alpha = rd.number(v.at("alpha"), ptr + "/alpha");
    if (!(d.alpha > 0.0 && d.alpha < 1.0)) rd.fail(ptr + "/alpha", "must lie in (0, 1)");
  }
  if (v.contains("calibration_windows")) {
    d.calibration_windows = static_cast<int>(
        rd.integer(v.at("calibration_windows"), ptr + "/calibration_windows", 1));
  }
  if (v.contains("coefficient_variant")) {
    const Json& c = v.at("coefficient_variant");
    const std::string at = ptr + "/coefficient_variant";
    if (c == "own-outputs") {
      d.coefficient = CoefficientVariant::kOwnOutputs;
    } else if (c == "dimension-consistent") {
      d.coefficient = CoefficientVariant::kDimensionConsistent;
    } else {
      rd.fail(at, "expected \"own-outputs\" or \"dimension-consistent\"");
    }
  }
  if (v.contains("wishart_argument")) {
    const Json& c = v.at("wishart_argument");
    const std::string at = ptr + "/wishart_argument";
    if (c == "window-sum") {
      d.scaling = ScatterScaling::kWindowSum;
    } else if (c == "window-mean") {
      d.scaling = ScatterScaling::kWindowMean;
    } else {
      rd.fail(at, "expected \"window-sum\" or \"window-mean\"");
    }
  }
  if (v.contains("tau")) {
    const Vector tau = rd.vector(v.at("tau"), ptr + "/tau");
    if (tau.size() != kappa) {
      rd.fail(ptr + "/tau", "expected one threshold per subcontroller (" +
                                std::to_string(kappa) + ")");
    }
    d.tau.assign(tau.data(), tau.data() + tau.size());
  }
  return d;
}

AttackScenario read_attack(const Reader& rd, const Json& v, const PlantModel& plant) {
  const std::string ptr = "/attack";
  rd.object(v, ptr, {"sensor", "comm"});
  const int kappa = plant.subcontrollers();
  AttackScenario attack;
  auto index = [&](const Json& obj, const std::string& at, const char* key) {
    const long i = rd.integer(rd.member(obj, at, key), at + "/" + key, 1);
    if (i > kappa) {
      rd.fail(at + "/" + key, "subcontroller " + std::to_string(i) + " does not exist");
    }
    return static_cast<int>(i - 1);
  };
  auto cov = [&](const Json& obj, const std::string& at, int outputs_of) {
    const Matrix c = rd.matrix(rd.member(obj, at, "cov"), at + "/cov");
    const int m = plant.outputs(outputs_of);
    rd.shape(c, m, m, at + "/cov");
    rd.checked(at + "/cov", [&] { require_covariance(c, m, "covariance"); });
    return c;
  };
  if (v.contains("sensor")) {
    const Json& list = v.at("sensor");
    if (!list.is_array()) rd.fail(ptr + "/sensor", "expected an array");
    for (std::size_t k = 0; k < list.size(); ++k) {
      const std::string at = ptr + "/sensor/" + std::to_string(k);
      rd.object(list[k], at, {"subcontroller", "cov"});
      const int i = index(list[k], at, "subcontroller");
      if (attack.sensor(i)) rd.fail(at, "duplicate sensor attack");
      attack.set_sensor(i, cov(list[k], at, i));
    }
  }
  if (v.contains("comm")) {
    const Json& list = v.at("comm");
    if (!list.is_array()) rd.fail(ptr + "/comm", "expected an array");
    for (std::size_t k = 0; k < list.size(); ++k) {
      const std::string at = ptr + "/comm/" + std::to_string(k);
      rd.object(list[k], at, {"receiver", "sender", "cov"});
      const int r = index(list[k], at, "receiver");
      const int s = index(list[k], at, "sender");
      if (r == s) rd.fail(at, "a subcontroller has no channel to itself");
      if (attack.comm(r, s)) rd.fail(at, "duplicate channel attack");
      attack.set_comm(r, s, cov(list[k], at, s));
    }
  }
  rd.checked(ptr, [&] { attack.validate(plant); });
  return attack;
}

RunConfig read_run(const Reader& rd, const Json& v, const PlantModel& plant) {
  const std::string ptr = "/run";
  rd.object(v, ptr, {"steps", "burn_in", "windows", "seed", "x0", "xhat0"});
  RunConfig r;
  if (v.contains("steps")) r.steps = rd.integer(v.at("steps"), ptr + "/steps", 0);
  if (v.contains("burn_in")) r.burn_in = rd.integer(v.at("burn_in"), ptr + "/burn_in", 0);
  if (v.contains("windows")) {
    r.windows = static_cast<int>(rd.integer(v.at("windows"), ptr + "/windows", 1));
  }
  if (v.contains("seed")) r.seed = rd.unsigned_integer(v.at("seed"), ptr + "/seed");
  const Eigen::Index p = plant.a.rows();
  if (v.contains("x0")) {
    r.x0 = rd.vector(v.at("x0"), ptr + "/x0");
    if (r.x0.size() != p) rd.fail(ptr + "/x0", "expected " + std::to_string(p) + " entries");
  }
  if (v.contains("xhat0")) {
    const Json& list = v.at("xhat0");
    const std::string at = ptr + "/xhat0";
    if (!list.is_array() || static_cast<int>(list.size()) != plant.subcontrollers()) {
      rd.fail(at, "expected one initial estimate per subcontroller");
    }
    for (std::size_t i = 0; i < list.size(); ++i) {
      r.xhat0.push_back(rd.vector(list[i], at + "/" + std::to_string(i)));
      if (r.xhat0.back().size() != p) {
        rd.fail(at + "/" + std::to_string(i), "expected " + std::to_string(p) + " entries");
      }
    }
  }
  return r;
}

using Ordered = nlohmann::ordered_json;

Ordered matrix_json(const Matrix& m) {
  Ordered rows = Ordered::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Ordered row = Ordered::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Ordered matrices_json(const std::vector<Matrix>& ms) {
  Ordered out = Ordered::array();
  for (const auto& m : ms) out.push_back(matrix_json(m));
  return out;
}

Ordered vector_json(const Vector& v) {
  Ordered out = Ordered::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v(k));
  return out;
}

// Arrays of scalars go on one line, everything else is indented.
void pretty(std::ostream& out, const Ordered& v, int indent) {
  const std::string pad(static_cast<std::size_t>(indent), ' ');
  const std::string inner(static_cast<std::size_t>(indent + 2), ' ');
  if (v.is_object()) {
    if (v.empty()) {
      out << "{}";
      return;
    }
    out << "{\n";
    bool first = true;
    for (const auto& item : v.items()) {
      if (!first) out << ",\n";
      first = false;
      out << inner << Ordered(item.key()).dump() << ": ";
      pretty(out, item.value(), indent + 2);
    }
    out << '\n' << pad << '}';
  } else if (v.is_array()) {
    bool flat = true;
    for (const auto& e : v) flat = flat && !e.is_structured();
    if (flat) {
      out << '[';
      for (std::size_t k = 0; k < v.size(); ++k) out << (k ? ", " : "") << v[k].dump();
      out << ']';
      return;
    }
    out << "[\n";
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (k) out << ",\n";
      out << inner;
      pretty(out, v[k], indent + 2);
    }
    out << '\n' << pad << ']';
  } else {
    out << v.dump();
  }
}

}  // namespace

GainSet ScenarioGains::gain_set() const {
  if (k_blocks.empty()) throw InputError("scenario has no gains.K_blocks; run design first");
  if (l_blocks.empty()) throw InputError("scenario has no gains.L_blocks; run design first");
  if (sigma_e_blocks.empty()) throw InputError("scenario has no gains.sigma_E_blocks");
  return GainSet{k_blocks, l_blocks, sigma_e_blocks};
}

Scenario parse_scenario(std::string_view text, const std::string& source) {
  LineState state;
  std::map<std::string, int> lines;
  Json root;
  LineRecordingBuilder builder(root, state, lines);
  try {
    Json::sax_parse(CountingIterator(text.data(), &state),
                    CountingIterator(text.data() + text.size(), &state), &builder);
  } catch (const Json::exception& e) {
    throw ScenarioError(source + ":" + std::to_string(state.line) + ": invalid JSON: " +
                            e.what(),
                        state.line);
  }

  const Reader rd(source, std::move(lines));
  rd.object(root, "", {"plant", "gains", "detector", "attack", "run"});
  Scenario s;
  s.plant = read_plant(rd, rd.member(root, "", "plant"));
  if (root.contains("gains")) s.gains = read_gains(rd, root.at("gains"), s.plant);
  if (root.contains("detector")) {
    s.detector = read_detector(rd, root.at("detector"), s.plant.subcontrollers());
  }
  if (root.contains("attack")) s.attack = read_attack(rd, root.at("attack"), s.plant);
  if (root.contains("run")) s.run = read_run(rd, root.at("run"), s.plant);
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open scenario file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path.string());
}

std::string write_scenario(const Scenario& s) {
  Ordered doc = Ordered::object();
  Ordered plant = Ordered::object();
  plant["A"] = matrix_json(s.plant.a);
  plant["B_blocks"] = matrices_json(s.plant.b_blocks);
  plant["C_blocks"] = matrices_json(s.plant.c_blocks);
  plant["sigma_W"] = matrix_json(s.plant.sigma_w);
  plant["sigma_Z_blocks"] = matrices_json(s.plant.sigma_z_blocks);
  doc["plant"] = std::move(plant);

  Ordered gains = Ordered::object();
  if (!s.gains.k_blocks.empty()) gains["K_blocks"] = matrices_json(s.gains.k_blocks);
  if (!s.gains.l_blocks.empty()) gains["L_blocks"] = matrices_json(s.gains.l_blocks);
  if (!s.gains.sigma_e_blocks.empty()) {
    gains["sigma_E_blocks"] = matrices_json(s.gains.sigma_e_blocks);
  }
  doc["gains"] = std::move(gains);

  Ordered det = Ordered::object();
  det["ell"] = s.detector.ell;
  det["alpha"] = s.detector.alpha;
  det["calibration_windows"] = s.detector.calibration_windows;
  det["coefficient_variant"] = s.detector.coefficient == CoefficientVariant::kOwnOutputs
                                   ? "own-outputs"
                                   : "dimension-consistent";
  det["wishart_argument"] =
      s.detector.scaling == ScatterScaling::kWindowSum ? "window-sum" : "window-mean";
  if (!s.detector.tau.empty()) det["tau"] = s.detector.tau;
  doc["detector"] = std::move(det);

  Ordered attack = Ordered::object();
  Ordered sensor = Ordered::array();
  for (const auto& [i, cov] : s.attack.sensor_attacks()) {
    Ordered item = Ordered::object();
    item["subcontroller"] = i + 1;
    item["cov"] = matrix_json(cov);
    sensor.push_back(std::move(item));
  }
  Ordered comm = Ordered::array();
  for (const auto& [key, cov] : s.attack.comm_attacks()) {
    Ordered item = Ordered::object();
    item["receiver"] = key.first + 1;
    item["sender"] = key.second + 1;
    item["cov"] = matrix_json(cov);
    comm.push_back(std::move(item));
  }
  attack["sensor"] = std::move(sensor);
  attack["comm"] = std::move(comm);
  doc["attack"] = std::move(attack);

  Ordered run = Ordered::object();
  run["steps"] = s.run.steps;
  run["burn_in"] = s.run.burn_in;
  run["windows"] = s.run.windows;
  run["seed"] = s.run.seed;
  if (s.run.x0.size() > 0) run["x0"] = vector_json(s.run.x0);
  if (!s.run.xhat0.empty()) {
    Ordered xh = Ordered::array();
    for (const auto& v : s.run.xhat0) xh.push_back(vector_json(v));
    run["xhat0"] = std::move(xh);
  }
  doc["run"] = std::move(run);

  std::ostringstream out;
  pretty(out, doc, 0);
  out << '\n';
  return out.str();
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  const std::string text = write_scenario(scenario);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write scenario file " + path.string());
  out << text;
  if (!out) throw InputError("failed writing scenario file " + path.string());
}

Scenario platoon_preset() {
  Scenario s;
  Matrix a = Matrix::Identity(5, 5);
  a(1, 0) = -1.0 / 20;
  a(1, 2) = 1.0 / 20;
  a(3, 2) = -1.0 / 20;
  a(3, 4) = 1.0 / 20;
  s.plant.a = a;

  Matrix b1 = Matrix::Zero(5, 1), b2 = Matrix::Zero(5, 1), b3 = Matrix::Zero(5, 1);
  b1(0, 0) = 1.0 / 20;
  b1(1, 0) = -1.0 / 800;
  b2(1, 0) = 1.0 / 800;
  b2(2, 0) = 1.0 / 20;
  b2(3, 0) = -1.0 / 800;
  b3(3, 0) = 1.0 / 800;
  b3(4, 0) = 1.0 / 20;
  s.plant.b_blocks = {b1, b2, b3};

  Matrix c1 = Matrix::Zero(1, 5), c2 = Matrix::Zero(2, 5), c3 = Matrix::Zero(2, 5);
  c1(0, 0) = 1;
  c2(0, 1) = 1;
  c2(1, 2) = 1;
  c3(0, 3) = 1;
  c3(1, 4) = 1;
  s.plant.c_blocks = {c1, c2, c3};

  s.plant.sigma_w = 5e-5 * Matrix::Identity(5, 5);
  s.plant.sigma_z_blocks = {1e-3 * Matrix::Identity(1, 1), 1e-3 * Matrix::Identity(2, 2),
                            1e-3 * Matrix::Identity(2, 2)};

  Matrix k1(1, 5), k2(1, 5), k3(1, 5);
  k1 << -1, 0.1, 0, 0, 0;
  k2 << 1, -1, -2, 0.1, 0;
  k3 << 0.5, -0.5, 0.5, -1, -2;
  s.gains.k_blocks = {k1, k2, k3};

  Matrix l1 = Matrix::Zero(5, 1), l2 = Matrix::Zero(5, 2), l3 = Matrix::Zero(5, 2);
  l1(0, 0) = -0.5;
  l2(0, 0) = 0.05;
  l2(1, 0) = -0.5;
  l2(2, 1) = -0.5;
  l3(2, 0) = 0.05;
  l3(3, 0) = -0.5;
  l3(4, 1) = -0.5;
  s.gains.l_blocks = {l1, l2, l3};
  s.gains.sigma_e_blocks = {Matrix::Constant(1, 1, 0.2), Matrix::Constant(1, 1, 0.2),
                            Matrix::Constant(1, 1, 0.2)};

  s.detector.ell = 100;
  s.detector.alpha = 0.05;
  s.detector.calibration_windows = 2000;
  s.run.steps = 10000;
  s.run.burn_in = 500;
  s.run.windows = 20;
  s.run.seed = 1;
  return s;
}

AttackScenario platoon_attack() {
  AttackScenario attack;
  attack.set_sensor(0, Matrix::Constant(1, 1, 0.5));
  attack.set_comm(1, 2, 0.2 * Matrix::Identity(2, 2));
  return attack;
}

}  // namespace netwm
