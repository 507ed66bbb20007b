#include "kecbf/robot_model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace kecbf {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument("RobotModel: " + msg);
}

} // namespace

void RobotModel::validate() const {
  const int n = n_links();
  require(n >= 1, "n_links must be >= 1");
  require(length.size() == n && com_offset.size() == n && inertia_com.size() == n,
          "per-link arrays must all have n_links entries");
  for (int i = 0; i < n; ++i) {
    require(std::isfinite(mass[i]) && mass[i] > 0.0, "mass must be positive (link " + std::to_string(i) + ")");
    require(std::isfinite(length[i]) && length[i] > 0.0, "length must be positive (link " + std::to_string(i) + ")");
    require(std::isfinite(inertia_com[i]) && inertia_com[i] >= 0.0,
            "inertia_com must be non-negative (link " + std::to_string(i) + ")");
    require(std::isfinite(com_offset[i]), "com_offset must be finite (link " + std::to_string(i) + ")");
  }
  require(std::isfinite(gravity_accel), "gravity_accel must be finite");
  require(actuation.rows() == n && actuation.cols() == n, "actuation matrix must be n x n");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(actuation);
  require(lu.isInvertible(), "actuation matrix must be full rank");
  if (torque_limit) {
    require(torque_limit->size() == n, "torque_limit must have n_links entries");
    for (int i = 0; i < n; ++i) {
      // +inf marks an unbounded joint; finite bounds must be strictly positive.
      const double b = (*torque_limit)[i];
      require(b > 0.0 && !std::isnan(b), "torque_limit must be positive (link " + std::to_string(i) + ")");
    }
  }
}

RobotModel RobotModel::with_gravity(double g) const {
  RobotModel out = *this;
  out.gravity_accel = g;
  return out;
}

RobotModel make_model(const Eigen::VectorXd& mass, const Eigen::VectorXd& length,
                      const Eigen::VectorXd& com_offset,
                      const Eigen::VectorXd& inertia_com, double gravity_accel) {
  RobotModel m;
  m.mass = mass;
  m.length = length;
  m.com_offset = com_offset;
  m.inertia_com = inertia_com;
  m.gravity_accel = gravity_accel;
  m.actuation = Eigen::MatrixXd::Identity(mass.size(), mass.size());
  m.validate();
  return m;
}

RobotModel make_rod_model(const Eigen::VectorXd& mass, const Eigen::VectorXd& length,
                          double gravity_accel) {
  Eigen::VectorXd com = 0.5 * length;
  Eigen::VectorXd inertia =
      (mass.array() * length.array().square() / 12.0).matrix();
  return make_model(mass, length, com, inertia, gravity_accel);
}

RobotModel default_model() {
  Eigen::VectorXd mass(3), length(3);
  mass << 8.0, 5.0, 3.0;
  length << 0.40, 0.35, 0.25;
  RobotModel m = make_rod_model(mass, length, 9.81);
  // Reflected drive inertia on each joint; keeps accelerations in the range a
  // 1 kHz torque loop can follow.
  m.inertia_com.array() += 0.10;
  return m;
}

RobotModel load_robot_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model config: " + path);

  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("parse error in " + path + ": " + e.what());
  }

  auto vec = [&](const char* key) {
    if (!j.contains(key)) throw std::runtime_error(path + ": missing field '" + key + "'");
    std::vector<double> v = j.at(key).get<std::vector<double>>();
    return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())).eval();
  };

  RobotModel m;
  m.mass = vec("mass");
  m.length = vec("length");
  m.com_offset = vec("com_offset");
  m.inertia_com = vec("inertia_com");
  m.gravity_accel = j.value("gravity_accel", 9.81);

  const auto n = m.mass.size();
  if (j.contains("actuation_matrix") && !j.at("actuation_matrix").is_null()) {
    auto rows = j.at("actuation_matrix").get<std::vector<std::vector<double>>>();
    if (static_cast<Eigen::Index>(rows.size()) != n)
      throw std::runtime_error(path + ": actuation_matrix must have n_links rows");
    m.actuation.resize(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      if (static_cast<Eigen::Index>(rows[r].size()) != n)
        throw std::runtime_error(path + ": actuation_matrix must be square");
      for (Eigen::Index c = 0; c < n; ++c) m.actuation(r, c) = rows[r][c];
    }
  } else {
    m.actuation = Eigen::MatrixXd::Identity(n, n);
  }

  if (j.contains("torque_limit") && !j.at("torque_limit").is_null()) {
    std::vector<double> v = j.at("torque_limit").get<std::vector<double>>();
    m.torque_limit = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())).eval();
  }

  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error("invalid model in " + path + ": " + e.what());
  }
  return m;
}

} // namespace kecbf
