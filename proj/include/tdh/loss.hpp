#pragma once

// The triplet-likelihood hashing objective
//
//   J = J_inter + J_intra + J_re
//   J_inter = nll(F; G, G) + nll(G; F, F)
//   J_intra = nll(F; F, F) + nll(G; G, G)
//   J_re    = gamma (|B - F|^2 + |B - G|^2) + eta (|F 1|^2 + |G 1|^2) + beta tr(B L B^T)
//
// where nll(A; P, P') = -sum_m log sigmoid(theta(A_q, P_p) - theta(A_q, P'_n) - alpha)
// and theta(u, v) = u.v / 2. F holds image-network outputs and G text-network
// outputs, one column per training instance.

#include <cstddef>
#include <cstdint>
#include <span>

#include "tdh/codes.hpp"
#include "tdh/linalg.hpp"

namespace tdh {

// Instance q is more similar to p than to n.
struct TripletLabel {
  std::size_t q = 0;
  std::size_t p = 0;
  std::size_t n = 0;

  friend bool operator==(const TripletLabel&, const TripletLabel&) = default;
};

struct HyperParams {
  double alpha = 0.0;
  double gamma = 100.0;
  double eta = 50.0;
  double beta = 1.0;
  std::size_t k = 0;

  // alpha = k / 2, remaining weights at their defaults.
  static HyperParams defaults_for(std::size_t code_length);
  void validate() const;
};

struct LossBreakdown {
  double j_inter = 0.0;
  double j_intra = 0.0;
  double j_re = 0.0;
  double total = 0.0;
};

enum class GradientMode : std::uint8_t {
  full,         // exact gradient of J, every triplet role
  anchor_only,  // only the terms where the column is the triplet anchor
};

double sigmoid(double x);
// log(1 + e^x) without overflow.
double softplus(double x);
double theta(std::span<const double> u, std::span<const double> v);

// Throws InvalidArgument naming the first triplet with an index out of range
// or p == n.
void validate_triplets(std::span<const TripletLabel> triplets, std::size_t n);

double triplet_nll(const Matrix& anchor_codes, const Matrix& pos_codes, const Matrix& neg_codes,
                   std::span<const TripletLabel> triplets, double alpha);

double j_inter(const Matrix& f, const Matrix& g, std::span<const TripletLabel> triplets,
               double alpha);
double j_intra(const Matrix& f, const Matrix& g, std::span<const TripletLabel> triplets,
               double alpha);
double j_re(const Matrix& f, const Matrix& g, const CodeMatrix& b, const Matrix& laplacian,
            double gamma, double eta, double beta);

LossBreakdown total_loss(const Matrix& f, const Matrix& g, const CodeMatrix& b,
                         const Matrix& laplacian, std::span<const TripletLabel> triplets,
                         const HyperParams& hp);

// dJ/dG and dJ/dF over all N columns.
Matrix grad_g(const Matrix& f, const Matrix& g, const CodeMatrix& b,
              std::span<const TripletLabel> triplets, const HyperParams& hp,
              GradientMode mode = GradientMode::full);
Matrix grad_f(const Matrix& f, const Matrix& g, const CodeMatrix& b,
              std::span<const TripletLabel> triplets, const HyperParams& hp,
              GradientMode mode = GradientMode::full);

}  // namespace tdh
