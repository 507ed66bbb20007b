#include "kecbf/trace.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace kecbf {

namespace {

constexpr char kMagic[4] = {'K', 'T', 'R', 'C'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_vec(std::ostream& out, const Eigen::VectorXd& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double) * v.size()));
}

} // namespace

void write_trace_csv(const std::string& path, const Trace& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open trace file for writing: " + path);
  out.precision(17);

  const auto n = trace.empty() ? 0 : trace.front().q.size();
  out << "t";
  for (Eigen::Index i = 0; i < n; ++i) out << ",q" << i;
  for (Eigen::Index i = 0; i < n; ++i) out << ",qdot" << i;
  out << ",k_e,h";
  for (Eigen::Index i = 0; i < n; ++i) out << ",u_nom" << i;
  for (Eigen::Index i = 0; i < n; ++i) out << ",u" << i;
  for (Eigen::Index i = 0; i < n; ++i) out << ",u_safe" << i;
  out << ",p_safe,p_ext,p_nom,intervened\n";

  for (const TraceRecord& r : trace) {
    out << r.t;
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << r.q[i];
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << r.qdot[i];
    out << ',' << r.k_e << ',' << r.h;
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << r.u_nom[i];
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << r.u[i];
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << r.u_safe[i];
    out << ',' << r.p_safe << ',' << r.p_ext << ',' << r.p_nom << ','
        << (r.intervened ? 1 : 0) << '\n';
  }
}

void write_trace_binary(const std::string& path, const Trace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open trace file for writing: " + path);

  const std::uint32_t n =
      trace.empty() ? 0 : static_cast<std::uint32_t>(trace.front().q.size());
  out.write(kMagic, sizeof kMagic);
  put_u32(out, kVersion);
  put_u32(out, n);
  put_u64(out, trace.size());

  for (const TraceRecord& r : trace) {
    put_f64(out, r.t);
    put_vec(out, r.q);
    put_vec(out, r.qdot);
    put_f64(out, r.k_e);
    put_f64(out, r.h);
    put_vec(out, r.u_nom);
    put_vec(out, r.u);
    put_vec(out, r.u_safe);
    put_f64(out, r.p_safe);
    put_f64(out, r.p_ext);
    put_f64(out, r.p_nom);
    const std::uint8_t flag = r.intervened ? 1 : 0;
    out.write(reinterpret_cast<const char*>(&flag), 1);
  }
  if (!out) throw std::runtime_error("short write to trace file: " + path);
}

Trace read_trace_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open trace file: " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("not a binary trace file: " + path);

  std::uint32_t version = 0, n = 0;
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  in.read(reinterpret_cast<char*>(&count), sizeof count);
  if (!in || version != kVersion)
    throw std::runtime_error("unsupported trace version in: " + path);

  auto get_f64 = [&in]() {
    double v;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  };
  auto get_vec = [&in, n]() {
    Eigen::VectorXd v(n);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double) * n));
    return v;
  };

  Trace trace;
  trace.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    TraceRecord r;
    r.t = get_f64();
    r.q = get_vec();
    r.qdot = get_vec();
    r.k_e = get_f64();
    r.h = get_f64();
    r.u_nom = get_vec();
    r.u = get_vec();
    r.u_safe = get_vec();
    r.p_safe = get_f64();
    r.p_ext = get_f64();
    r.p_nom = get_f64();
    std::uint8_t flag = 0;
    in.read(reinterpret_cast<char*>(&flag), 1);
    r.intervened = flag != 0;
    if (!in) throw std::runtime_error("truncated trace file: " + path);
    trace.push_back(std::move(r));
  }
  return trace;
}

} // namespace kecbf
