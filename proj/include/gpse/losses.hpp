#pragma once

#include <vector>

#include "gpse/autodiff.hpp"
#include "gpse/stft.hpp"

namespace gpse {

// Denoising score matching: mean over complex elements of |score + z/sigma|^2.
// Zero exactly when score is the kernel score of the perturbation that
// produced (x_t, z).
double dsm_loss(const ComplexSpec& score, const ComplexSpec& z, double sigma_t);

// Mean squared complex magnitude of (x_pred - x0).
double predictive_loss(const ComplexSpec& x_pred, const ComplexSpec& x0);

double combined_loss(double gen, double pred, double w_gen, double w_pred);

// Tape-building versions used by the trainer. score/x_pred are [N,2,H,W]
// head outputs; z/x0 are packed the same way; sigma has one entry per item.
Var dsm_loss_var(const Var& score, const Tensor& z, const std::vector<double>& sigma);

// lambda(t)-weighted form, mean |D score + (D/sigma) z|^2 with D the score
// head's output scale: same optimum as dsm_loss, O(1) regression targets for
// the raw head at every t. With D = sigma this is the sigma^2-weighted DSM
// loss; this is what the trainer descends.
Var dsm_loss_weighted_var(const Var& score, const Tensor& z,
                          const std::vector<double>& sigma,
                          const std::vector<double>& out_scale);
Var predictive_loss_var(const Var& x_pred, const Tensor& x0);

// Packs a batch of spectrograms into the [N,2,H,W] re/im layout.
Tensor pack_specs(const std::vector<const ComplexSpec*>& specs);

}  // namespace gpse
