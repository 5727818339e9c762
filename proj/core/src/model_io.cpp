#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ldbuffer/error.hpp"
#include "ldbuffer/model.hpp"

namespace ldb {

using nlohmann::json;

namespace {

Vector to_vector(const json& j, const char* what) {
  if (!j.is_array()) fail(ErrorKind::ParseError, std::string(what) + " must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      fail(ErrorKind::ParseError, std::string(what) + " must contain numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

RateFn parse_rate(const json& j, int k) {
  if (!j.is_object()) fail(ErrorKind::ParseError, "rate must be an object");
  if (j.contains("c0") || j.contains("lin")) {
    if (!j.contains("c0") || !j.contains("lin"))
      fail(ErrorKind::ParseError, "affine rate needs both \"c0\" and \"lin\"");
    return RateFn::affine(j.at("c0").get<double>(), to_vector(j.at("lin"), "lin"));
  }
  if (!j.contains("c")) fail(ErrorKind::ParseError, "rate needs key \"c\"");
  double c = j.at("c").get<double>();
  if (!j.contains("m")) return RateFn::constant(c);
  std::vector<int> m = j.at("m").get<std::vector<int>>();
  if (static_cast<int>(m.size()) != k)
    fail(ErrorKind::ParseError, "rate exponents \"m\" must have length K");
  bool all_zero = true;
  for (int e : m) all_zero = all_zero && e == 0;
  return all_zero ? RateFn::constant(c) : RateFn::monomial(c, std::move(m));
}

}  // namespace

JumpModel parse_model(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, std::string("model JSON: ") + e.what());
  }
  try {
    const int k = doc.at("K").get<int>();
    std::vector<Transition> transitions;
    for (const auto& t : doc.at("transitions")) {
      std::vector<int> e = t.at("e").get<std::vector<int>>();
      IntVector dir(static_cast<Eigen::Index>(e.size()));
      for (std::size_t i = 0; i < e.size(); ++i) dir(static_cast<Eigen::Index>(i)) = e[i];
      transitions.push_back({dir, parse_rate(t.at("rate"), k)});
    }
    return JumpModel(k, std::move(transitions), to_vector(doc.at("a"), "a"),
                     doc.at("C").get<double>());
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, std::string("model JSON: ") + e.what());
  }
}

JumpModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open model file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

std::string model_to_json(const JumpModel& model) {
  json doc;
  doc["K"] = model.dim();
  doc["transitions"] = json::array();
  for (const auto& t : model.transitions()) {
    json jt;
    jt["e"] = std::vector<int>(t.direction.data(), t.direction.data() + t.direction.size());
    json jr;
    switch (t.rate.kind) {
      case RateFn::Kind::Constant:
        jr["c"] = t.rate.c;
        jr["m"] = std::vector<int>(static_cast<std::size_t>(model.dim()), 0);
        break;
      case RateFn::Kind::Monomial:
        jr["c"] = t.rate.c;
        jr["m"] = t.rate.exponents;
        break;
      case RateFn::Kind::Affine:
        jr["c0"] = t.rate.c0;
        jr["lin"] = std::vector<double>(t.rate.lin.data(), t.rate.lin.data() + t.rate.lin.size());
        break;
    }
    jt["rate"] = jr;
    doc["transitions"].push_back(jt);
  }
  const Vector& a = model.buffer_weights();
  doc["a"] = std::vector<double>(a.data(), a.data() + a.size());
  doc["C"] = model.drain();
  return doc.dump(2);
}

}  // namespace ldb
