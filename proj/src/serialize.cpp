#include "rflab/serialize.hpp"

#include "rflab/entropy.hpp"
#include "rflab/report.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rflab {

namespace {

void put_doubles(std::ostream& os, const double* p, std::size_t count) {
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(count * 8));
}

void get_doubles(std::istream& is, double* p, std::size_t count) {
  is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(count * 8));
  if (!is) throw std::runtime_error("container: truncated payload");
}

std::pair<std::string, std::string> split_kv(const std::string& line) {
  auto pos = line.find(',');
  if (pos == std::string::npos) return {line, ""};
  return {line.substr(0, pos), line.substr(pos + 1)};
}

}  // namespace

void write_container(const std::string& path, const FlowHistory& flow,
                     const std::vector<KernelHistory>& kernels) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  const Mesh& m = *flow.mesh;

  os << "#RFLAB-FLOW v1\n";
  os << "backend," << backend_name(flow.backend) << "\n";
  os << "n," << m.dim << "\n";
  if (m.topology == Topology::SphereSpectral) {
    os << "topology,sphere-spectral\n";
    os << "degree," << m.degree << "\n";
    os << "base_radius," << format_double(m.base_radius) << "\n";
  } else {
    os << "topology,periodic-box\n";
    os << "res";
    for (int a = 0; a < m.dim; ++a) os << "," << m.res[a];
    os << "\n";
    os << "side";
    for (int a = 0; a < m.dim; ++a) os << "," << format_double(m.side[a]);
    os << "\n";
  }
  os << "ntimes," << flow.num_slices() << "\n";
  os << "payload,f64le\n";
  put_doubles(os, flow.times.data(), flow.times.size());
  if (flow.backend == Backend::Sphere) {
    std::vector<double> radii;
    for (const auto& s : flow.slices) radii.push_back(s.radius);
    put_doubles(os, radii.data(), radii.size());
  } else if (flow.backend == Backend::Conformal) {
    for (const auto& s : flow.slices) put_doubles(os, s.u.data(), s.u.size());
  }

  for (const auto& k : kernels) {
    os << "#RFLAB-KERNEL v1\n";
    os << "basepoint," << k.basepoint << "\n";
    os << "base_time," << format_double(k.base_time) << "\n";
    os << "eps0," << format_double(k.eps0) << "\n";
    os << "analytic," << (k.analytic ? 1 : 0) << "\n";
    os << "nsamples," << k.sample_s.size() << "\n";
    os << "payload,f64le\n";
    put_doubles(os, k.sample_s.data(), k.sample_s.size());
    put_doubles(os, k.sample_mass.data(), k.sample_mass.size());
    for (const auto& w : k.samples) put_doubles(os, w.data(), w.size());
  }
  os << "#END\n";
  if (!os) throw std::runtime_error("write failed: " + path);
}

Container read_container(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(is, line) || line != "#RFLAB-FLOW v1")
    throw std::runtime_error("container: bad magic in " + path);

  Container c;
  std::string backend_str, topology;
  int n = 0, degree = 0;
  double base_radius = 0.0;
  std::array<int, 3> res = {0, 0, 0};
  std::array<double, 3> side = {0, 0, 0};
  std::size_t ntimes = 0;

  while (std::getline(is, line)) {
    auto [key, val] = split_kv(line);
    if (key == "payload") break;
    if (key == "backend") backend_str = val;
    else if (key == "n") n = std::stoi(val);
    else if (key == "topology") topology = val;
    else if (key == "degree") degree = std::stoi(val);
    else if (key == "base_radius") base_radius = std::stod(val);
    else if (key == "ntimes") ntimes = std::stoul(val);
    else if (key == "res" || key == "side") {
      std::stringstream ss(val);
      std::string tok;
      int a = 0;
      while (std::getline(ss, tok, ',') && a < 3) {
        if (key == "res") res[a] = std::stoi(tok);
        else side[a] = std::stod(tok);
        ++a;
      }
    }
  }

  Backend backend = backend_from_name(backend_str);
  std::shared_ptr<const Mesh> mesh;
  if (topology == "sphere-spectral") mesh = Mesh::sphere(degree, base_radius);
  else mesh = Mesh::periodic_box(n, side, res);

  c.flow.mesh = mesh;
  c.flow.backend = backend;
  c.flow.times.resize(ntimes);
  get_doubles(is, c.flow.times.data(), ntimes);
  std::int64_t nn = mesh->num_nodes();
  if (backend == Backend::Sphere) {
    std::vector<double> radii(ntimes);
    get_doubles(is, radii.data(), ntimes);
    for (std::size_t k = 0; k < ntimes; ++k)
      c.flow.slices.push_back(MetricSlice::sphere(mesh, c.flow.times[k], radii[k]));
  } else if (backend == Backend::Conformal) {
    for (std::size_t k = 0; k < ntimes; ++k) {
      Field u(nn);
      get_doubles(is, u.data(), nn);
      c.flow.slices.push_back(MetricSlice::conformal(mesh, c.flow.times[k], std::move(u)));
    }
  } else {
    for (std::size_t k = 0; k < ntimes; ++k)
      c.flow.slices.push_back(MetricSlice::flat(mesh, c.flow.times[k]));
  }
  for (const auto& s : c.flow.slices) {
    c.flow.min_curvature.push_back(min_scalar_curvature(s));
    c.flow.volume.push_back(total_volume(s));
  }
  c.flow.validate();

  while (std::getline(is, line)) {
    if (line == "#END") break;
    if (line != "#RFLAB-KERNEL v1")
      throw std::runtime_error("container: unexpected section: " + line);
    KernelHistory k;
    k.backend = backend;
    std::size_t nsamples = 0;
    while (std::getline(is, line)) {
      auto [key, val] = split_kv(line);
      if (key == "payload") break;
      if (key == "basepoint") k.basepoint = std::stoll(val);
      else if (key == "base_time") k.base_time = std::stod(val);
      else if (key == "eps0") k.eps0 = std::stod(val);
      else if (key == "analytic") k.analytic = (val == "1");
      else if (key == "nsamples") nsamples = std::stoul(val);
    }
    k.sample_s.resize(nsamples);
    k.sample_mass.resize(nsamples);
    get_doubles(is, k.sample_s.data(), nsamples);
    get_doubles(is, k.sample_mass.data(), nsamples);
    for (std::size_t j = 0; j < nsamples; ++j) {
      Field w(nn);
      get_doubles(is, w.data(), nn);
      k.samples.push_back(std::move(w));
    }
    c.kernels.push_back(std::move(k));
  }
  return c;
}

std::string curve_to_csv(const EntropyCurve& curve) {
  std::string out = "s,W,N,D\n";
  for (std::size_t j = 0; j < curve.s.size(); ++j)
    out += format_double(curve.s[j]) + "," + format_double(curve.W[j]) + "," +
           format_double(curve.N[j]) + "," + format_double(curve.D[j]) + "\n";
  return out;
}

}  // namespace rflab
