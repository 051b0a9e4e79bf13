#include "growthld/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "growthld/table.hpp"

namespace growthld::io {

namespace {

[[noreturn]] void fail(const std::string& message) {
  throw Error(ErrorCode::InvalidConfig, message);
}

double number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) fail(std::string("missing field \"") + key + "\"");
  const auto& v = j.at(key);
  if (!v.is_number()) fail(std::string("field \"") + key + "\" must be a number");
  return v.get<double>();
}

Eigen::MatrixXd matrix(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) fail(std::string("missing field \"") + key + "\"");
  const auto& rows = j.at(key);
  if (!rows.is_array() || rows.empty()) {
    fail(std::string("field \"") + key + "\" must be a nonempty array of rows");
  }
  const std::size_t cols = rows.at(0).is_array() ? rows.at(0).size() : 0;
  Eigen::MatrixXd m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows.at(r);
    if (!row.is_array() || row.size() != cols) {
      fail(std::string("field \"") + key + "\" must be a rectangular array of rows");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!row.at(c).is_number()) fail(std::string("field \"") + key + "\" has a non-number");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row.at(c).get<double>();
    }
  }
  return m;
}

Eigen::VectorXd vector(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) fail(std::string("missing field \"") + key + "\"");
  const auto& values = j.at(key);
  if (!values.is_array()) fail(std::string("field \"") + key + "\" must be an array");
  Eigen::VectorXd v(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values.at(i).is_number()) fail(std::string("field \"") + key + "\" has a non-number");
    v(static_cast<Eigen::Index>(i)) = values.at(i).get<double>();
  }
  return v;
}

void only_keys(const nlohmann::json& j, std::set<std::string> allowed) {
  allowed.insert({"model", "name", "comment"});
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) fail("unknown field \"" + key + "\"");
  }
}

nlohmann::ordered_json rows_of(const Eigen::MatrixXd& m) {
  auto out = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

std::string infer_kind(const nlohmann::json& j) {
  if (j.contains("model")) {
    if (!j.at("model").is_string()) fail("\"model\" must be a string");
    return j.at("model").get<std::string>();
  }
  if (j.contains("b")) return "black_scholes";
  if (j.contains("K") && j.at("K").is_array()) return "linear_factor_md";
  if (j.contains("K") && j.contains("sigma_norm") && !j.contains("B1") && !j.contains("B0") &&
      !j.contains("gamma_norm") && !j.contains("rho")) {
    return "platen_rebolledo";
  }
  if (j.contains("K")) return "linear_factor_1d";
  fail("cannot tell the model type from the given fields");
}

}  // namespace

ModelSpec parse_model(const nlohmann::json& j) {
  if (!j.is_object()) fail("model must be a JSON object");
  const std::string kind = infer_kind(j);
  ModelSpec model;
  if (kind == "black_scholes") {
    only_keys(j, {"b", "sigma"});
    model = models::BlackScholesModel{number(j, "b"), number(j, "sigma")};
  } else if (kind == "linear_factor_1d") {
    only_keys(j, {"K", "B1", "B0", "sigma_norm", "gamma_norm", "rho"});
    model = models::LinearFactor1D{number(j, "K"),          number(j, "B1"),
                                   number(j, "B0"),         number(j, "sigma_norm"),
                                   number(j, "gamma_norm"), number(j, "rho")};
  } else if (kind == "platen_rebolledo") {
    only_keys(j, {"K", "sigma_norm"});
    model = models::PlatenRebolledo{number(j, "K"), number(j, "sigma_norm")};
  } else if (kind == "linear_factor_md") {
    only_keys(j, {"K", "B1", "B0", "sigma", "gamma"});
    model = riccati::LinearFactorMD{matrix(j, "K"), matrix(j, "B1"), vector(j, "B0"),
                                    matrix(j, "sigma"), matrix(j, "gamma")};
  } else {
    fail("unknown model type \"" + kind + "\"");
  }
  validate(model);
  return model;
}

ModelSpec load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open model file " + path);
  try {
    return parse_model(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    fail("model file " + path + ": " + e.what());
  }
}

nlohmann::ordered_json model_to_json(const ModelSpec& model) {
  nlohmann::ordered_json j;
  j["model"] = model_name(model);
  if (const auto* m = std::get_if<models::BlackScholesModel>(&model)) {
    j["b"] = m->b;
    j["sigma"] = m->sigma;
  } else if (const auto* m = std::get_if<models::LinearFactor1D>(&model)) {
    j["K"] = m->K;
    j["B1"] = m->B1;
    j["B0"] = m->B0;
    j["sigma_norm"] = m->sigma_norm;
    j["gamma_norm"] = m->gamma_norm;
    j["rho"] = m->rho;
  } else if (const auto* m = std::get_if<models::PlatenRebolledo>(&model)) {
    j["K"] = m->K;
    j["sigma_norm"] = m->sigma_norm;
  } else if (const auto* m = std::get_if<riccati::LinearFactorMD>(&model)) {
    j["K"] = rows_of(m->K);
    j["B1"] = rows_of(m->B1);
    j["B0"] = std::vector<double>(m->B0.data(), m->B0.data() + m->B0.size());
    j["sigma"] = rows_of(m->sigma);
    j["gamma"] = rows_of(m->gamma);
  }
  return j;
}

std::vector<double> parse_grid(const std::string& text) {
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t");
    const auto b = s.find_last_not_of(" \t");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  std::vector<std::string> parts;
  const char separator = text.find(':') != std::string::npos ? ':' : ',';
  std::stringstream stream(text);
  for (std::string item; std::getline(stream, item, separator);) parts.push_back(trim(item));
  if (text.empty()) fail("empty grid");

  if (separator == ':') {
    if (parts.size() != 3) fail("grid must be a:b:n, got '" + text + "'");
    const double a = parse_number(parts[0]);
    const double b = parse_number(parts[1]);
    const double count = parse_number(parts[2]);
    if (!(count >= 1) || count != std::floor(count)) fail("grid point count must be a positive integer");
    const auto n = static_cast<std::size_t>(count);
    if (n == 1) return {a};
    std::vector<double> grid(n);
    for (std::size_t i = 0; i < n; ++i) {
      grid[i] = i + 1 == n ? b : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return grid;
  }
  std::vector<double> grid;
  for (const auto& p : parts) grid.push_back(parse_number(p));
  return grid;
}

}  // namespace growthld::io
