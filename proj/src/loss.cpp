#include "tdh/loss.hpp"

#include <cmath>

#include "tdh/error.hpp"

namespace tdh {

HyperParams HyperParams::defaults_for(std::size_t code_length) {
  HyperParams hp;
  hp.k = code_length;
  hp.alpha = static_cast<double>(code_length) / 2.0;
  return hp;
}

void HyperParams::validate() const {
  if (!std::isfinite(alpha)) throw InvalidArgument("alpha must be finite");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be >= 0");
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw InvalidArgument("eta must be >= 0");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw InvalidArgument("beta must be >= 0");
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double theta(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw ShapeError("theta: length mismatch " + std::to_string(u.size()) + " vs " +
                     std::to_string(v.size()));
  }
  return 0.5 * dot(u, v);
}

void validate_triplets(std::span<const TripletLabel> triplets, std::size_t n) {
  for (std::size_t m = 0; m < triplets.size(); ++m) {
    const auto& t = triplets[m];
    if (t.q >= n || t.p >= n || t.n >= n) {
      throw InvalidArgument("triplet " + std::to_string(m) + " (" + std::to_string(t.q) + "," +
                            std::to_string(t.p) + "," + std::to_string(t.n) +
                            ") out of range for " + std::to_string(n) + " instances");
    }
    if (t.p == t.n) {
      throw InvalidArgument("triplet " + std::to_string(m) + " has identical positive and negative");
    }
  }
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_of(a) + " vs " + shape_of(b));
  }
}

// Instance-major copy (N x k) so each code is a contiguous span.
struct Columns {
  explicit Columns(const Matrix& m) : t(transpose(m)) {}
  std::span<const double> operator[](std::size_t i) const { return t.row(i); }
  Matrix t;
};

// Margin argument theta(a_q, p_p) - theta(a_q, n_n) - alpha of one triplet.
double margin(std::span<const double> a, std::span<const double> p, std::span<const double> n,
              double alpha) {
  double s = 0.0;
  for (std::size_t r = 0; r < a.size(); ++r) s += a[r] * (p[r] - n[r]);
  return 0.5 * s - alpha;
}

// Adds the gradient of nll(anchor; pos, pos) to the given accumulators
// (instance-major, N x k). Either accumulator may be null to drop that role.
void accumulate_nll_grad(const Columns& anchor, const Columns& pos,
                         std::span<const TripletLabel> triplets, double alpha,
                         Matrix* anchor_grad, Matrix* pos_grad) {
  for (const auto& t : triplets) {
    const auto a = anchor[t.q];
    const auto p = pos[t.p];
    const auto n = pos[t.n];
    // d/dx of -log sigmoid(x) is -sigmoid(-x)
    const double c = -0.5 * sigmoid(-margin(a, p, n, alpha));
    if (anchor_grad != nullptr) {
      auto out = anchor_grad->row(t.q);
      for (std::size_t r = 0; r < a.size(); ++r) out[r] += c * (p[r] - n[r]);
    }
    if (pos_grad != nullptr) {
      auto out_p = pos_grad->row(t.p);
      for (std::size_t r = 0; r < a.size(); ++r) out_p[r] += c * a[r];
      auto out_n = pos_grad->row(t.n);
      for (std::size_t r = 0; r < a.size(); ++r) out_n[r] -= c * a[r];
    }
  }
}

double nll(const Columns& anchor, const Columns& pos, const Columns& neg,
           std::span<const TripletLabel> triplets, double alpha) {
  double total = 0.0;
  for (const auto& t : triplets) total += softplus(-margin(anchor[t.q], pos[t.p], neg[t.n], alpha));
  return total;
}

// 2 gamma (X - B) + 2 eta (X 1) 1^T, instance-major.
Matrix regularizer_grad(const Matrix& x, const CodeMatrix& b, const HyperParams& hp) {
  const auto sums = row_sums(x);
  Matrix out(x.cols(), x.rows());
  for (std::size_t i = 0; i < x.cols(); ++i) {
    auto row = out.row(i);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      row[r] = 2.0 * hp.gamma * (x(r, i) - b(r, i)) + 2.0 * hp.eta * sums[r];
    }
  }
  return out;
}

// Gradient with respect to `self`, where `other` is the opposite modality.
// Inter-modal: self is the anchor of nll(self; other) and the positive/negative
// side of nll(other; self). Intra-modal: nll(self; self) in every role.
Matrix modality_grad(const Matrix& self, const Matrix& other, const CodeMatrix& b,
                     std::span<const TripletLabel> triplets, const HyperParams& hp,
                     GradientMode mode) {
  require_same_shape(self, other, "gradient");
  require_same_shape(self, b.matrix(), "gradient");
  validate_triplets(triplets, self.cols());
  const Columns s(self);
  const Columns o(other);
  Matrix grad = regularizer_grad(self, b, hp);
  const bool full = mode == GradientMode::full;
  accumulate_nll_grad(s, o, triplets, hp.alpha, &grad, nullptr);
  accumulate_nll_grad(s, s, triplets, hp.alpha, &grad, full ? &grad : nullptr);
  if (full) accumulate_nll_grad(o, s, triplets, hp.alpha, nullptr, &grad);
  return transpose(grad);
}

}  // namespace

double triplet_nll(const Matrix& anchor_codes, const Matrix& pos_codes, const Matrix& neg_codes,
                   std::span<const TripletLabel> triplets, double alpha) {
  require_same_shape(anchor_codes, pos_codes, "triplet_nll");
  require_same_shape(anchor_codes, neg_codes, "triplet_nll");
  validate_triplets(triplets, anchor_codes.cols());
  const Columns a(anchor_codes);
  if (&pos_codes == &neg_codes) {
    const Columns p(pos_codes);
    return nll(a, p, p, triplets, alpha);
  }
  return nll(a, Columns(pos_codes), Columns(neg_codes), triplets, alpha);
}

double j_inter(const Matrix& f, const Matrix& g, std::span<const TripletLabel> triplets,
               double alpha) {
  require_same_shape(f, g, "j_inter");
  return triplet_nll(f, g, g, triplets, alpha) + triplet_nll(g, f, f, triplets, alpha);
}

double j_intra(const Matrix& f, const Matrix& g, std::span<const TripletLabel> triplets,
               double alpha) {
  require_same_shape(f, g, "j_intra");
  return triplet_nll(f, f, f, triplets, alpha) + triplet_nll(g, g, g, triplets, alpha);
}

double j_re(const Matrix& f, const Matrix& g, const CodeMatrix& b, const Matrix& laplacian,
            double gamma, double eta, double beta) {
  require_same_shape(f, g, "j_re");
  require_same_shape(f, b.matrix(), "j_re");
  if (laplacian.rows() != f.cols() || laplacian.cols() != f.cols()) {
    throw ShapeError("j_re: laplacian " + shape_of(laplacian) + " for " + std::to_string(f.cols()) +
                     " instances");
  }
  const double quantization = frobenius_sq(b.matrix() - f) + frobenius_sq(b.matrix() - g);
  double balance = 0.0;
  for (double s : row_sums(f)) balance += s * s;
  for (double s : row_sums(g)) balance += s * s;
  double smoothness = 0.0;
  if (beta != 0.0) {
    const Matrix bl = matmul(b.matrix(), laplacian);
    const auto x = bl.data();
    const auto y = b.matrix().data();
    for (std::size_t i = 0; i < x.size(); ++i) smoothness += x[i] * y[i];
  }
  return gamma * quantization + eta * balance + beta * smoothness;
}

LossBreakdown total_loss(const Matrix& f, const Matrix& g, const CodeMatrix& b,
                         const Matrix& laplacian, std::span<const TripletLabel> triplets,
                         const HyperParams& hp) {
  LossBreakdown out;
  out.j_inter = j_inter(f, g, triplets, hp.alpha);
  out.j_intra = j_intra(f, g, triplets, hp.alpha);
  out.j_re = j_re(f, g, b, laplacian, hp.gamma, hp.eta, hp.beta);
  out.total = out.j_inter + out.j_intra + out.j_re;
  return out;
}

Matrix grad_g(const Matrix& f, const Matrix& g, const CodeMatrix& b,
              std::span<const TripletLabel> triplets, const HyperParams& hp, GradientMode mode) {
  return modality_grad(g, f, b, triplets, hp, mode);
}

Matrix grad_f(const Matrix& f, const Matrix& g, const CodeMatrix& b,
              std::span<const TripletLabel> triplets, const HyperParams& hp, GradientMode mode) {
  return modality_grad(f, g, b, triplets, hp, mode);
}

}  // namespace tdh
