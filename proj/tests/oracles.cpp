#include "oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace rflab::oracle {

Field wrapped_gaussian(const Mesh& mesh, NodeIndex x0, double s) {
  if (!(s < 0.0)) throw std::invalid_argument("wrapped_gaussian needs s < 0");
  double tau = -s;
  int n = mesh.dim;
  std::int64_t nn = mesh.num_nodes();
  Field out(nn, 0.0);
  auto c0 = mesh.coords_of(x0);
  for (std::int64_t i = 0; i < nn; ++i) {
    auto c = mesh.coords_of(i);
    double val = 1.0;
    for (int a = 0; a < n; ++a) {
      double L = mesh.side[a];
      double d = c[a] * mesh.spacing(a) - c0[a] * mesh.spacing(a);
      double axis_sum = 0.0;
      for (int im = -40; im <= 40; ++im) {
        double z = d + im * L;
        double term = std::exp(-z * z / (4.0 * tau));
        axis_sum += term;
        if (std::abs(im) > 2 && term < 1e-16 * axis_sum) break;
      }
      val *= axis_sum / std::sqrt(4.0 * M_PI * tau);
    }
    out[i] = val;
  }
  return out;
}

double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

double gaussian_second_moment(int n, double s) { return 2.0 * n * (-s); }

double gaussian_fourth_moment(int n, double s) {
  double v = 2.0 * (-s);
  return (static_cast<double>(n) * n + 2.0 * n) * v * v;
}

Field dense_conformal_laplacian_apply(const Mesh& mesh, const Field& u, const Field& phi) {
  if (mesh.dim != 2) throw std::invalid_argument("dense assembly is 2-D only");
  int nx = mesh.res[0], ny = mesh.res[1];
  double hx = mesh.spacing(0), hy = mesh.spacing(1);
  std::int64_t nn = mesh.num_nodes();
  std::vector<double> A(static_cast<std::size_t>(nn) * nn, 0.0);
  auto id = [&](int i, int j) {
    return static_cast<std::int64_t>(((i + nx) % nx)) * ny + ((j + ny) % ny);
  };
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      std::int64_t row = id(i, j);
      double c = std::exp(-2.0 * u[row]);
      A[row * nn + id(i + 1, j)] += c / (hx * hx);
      A[row * nn + id(i - 1, j)] += c / (hx * hx);
      A[row * nn + id(i, j + 1)] += c / (hy * hy);
      A[row * nn + id(i, j - 1)] += c / (hy * hy);
      A[row * nn + row] -= 2.0 * c / (hx * hx) + 2.0 * c / (hy * hy);
    }
  Field out(nn, 0.0);
  for (std::int64_t r = 0; r < nn; ++r)
    for (std::int64_t c = 0; c < nn; ++c) out[r] += A[r * nn + c] * phi[c];
  return out;
}

double sphere_radius(double r0, double t) { return std::sqrt(r0 * r0 - 2.0 * t); }

double mode_decay(double k, double dt) { return std::exp(-k * k * dt); }

}  // namespace rflab::oracle
