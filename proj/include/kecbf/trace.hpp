#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace kecbf {

/// One logged control tick. Column order and units are documented in the
/// README; the CSV writer emits exactly these fields in this order.
struct TraceRecord {
  double t = 0.0;          // tick start time [s]
  Eigen::VectorXd q;       // plant positions [rad]
  Eigen::VectorXd qdot;    // plant velocities [rad/s]
  double k_e = 0.0;        // kinetic energy of the plant state [J]
  double h = 0.0;          // barrier value seen by the filter [J]
  Eigen::VectorXd u_nom;   // nominal torque [N m]
  Eigen::VectorXd u;       // commanded torque [N m]
  Eigen::VectorXd u_safe;  // filter correction [N m]
  double p_safe = 0.0;     // filter power, qdot^T B u_safe [W]
  double p_ext = 0.0;      // external power, qdot^T tau_ext [W]
  double p_nom = 0.0;      // nominal power, qdot^T B u_nom [W]
  bool intervened = false;
};

using Trace = std::vector<TraceRecord>;

void write_trace_csv(const std::string& path, const Trace& trace);

/// Compact little-endian binary format for large sweeps ("KTRC" magic,
/// version, n_links, record count, then packed records).
void write_trace_binary(const std::string& path, const Trace& trace);
Trace read_trace_binary(const std::string& path);

} // namespace kecbf
