#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kooprel/koopman/model.hpp"

namespace kooprel::koopman {

struct LossTerms {
  double total = 0.0;
  double reconstruction = 0.0;  // L1
  double linearity = 0.0;       // L2
  double prediction = 0.0;      // L3
  double rollout = 0.0;         // L4, multi-step term (0 unless enabled in training)
};

/// Gradients for the three networks of a KoopmanModel.
struct ModelGrads {
  nn::Parameters encoder;
  nn::Parameters koopman;
  nn::Parameters decoder;

  static ModelGrads zeros(const KoopmanModel& m) {
    return {nn::zero_parameters(m.encoder.spec), nn::zero_parameters(m.koopman.spec),
            nn::zero_parameters(m.decoder.spec)};
  }
  void set_zero() {
    encoder.set_zero();
    koopman.set_zero();
    decoder.set_zero();
  }
};

/// (X_k, X_{k+1}) pairs in physical units; params is count x param_dim.
struct PairBatch {
  std::size_t count = 0;
  std::vector<double> current;
  std::vector<double> next;
  std::vector<double> params;
};

/// Composite loss on normalized pairs:
///   L1 = mse(X, dec(enc(X)))       over both X_k and X_{k+1}
///   L2 = mse(enc(X_{k+1}), K enc(X_k))
///   L3 = mse(X_{k+1}, dec(K enc(X_k)))
///   L  = l1 L1 + l2 L2 + l3 L3
/// When `grads` is non-null, dL/dtheta is accumulated into it.
inline LossTerms composite_loss_normalized(const KoopmanModel& m, std::span<const double> xk,
                                           std::span<const double> xk1, std::span<const double> p,
                                           std::size_t count, const LossWeights& w, ModelGrads* grads) {
  const std::size_t S = m.state_dim, Z = m.latent_dim, P = m.param_dim;
  if (count == 0 || xk.size() != count * S || xk1.size() != count * S || p.size() != count * P) {
    throw ConfigError("composite_loss: inconsistent batch shapes");
  }
  // Encoder on [X_k ; X_{k+1}] as one batch of 2*count.
  std::vector<double> x_both(xk.begin(), xk.end());
  x_both.insert(x_both.end(), xk1.begin(), xk1.end());
  std::vector<double> p_both(p.begin(), p.end());
  p_both.insert(p_both.end(), p.begin(), p.end());
  const auto enc_in = detail::concat_rows(x_both, S, p_both, P, 2 * count);
  const auto enc_act = nn::forward_batch(m.encoder.spec, m.encoder.params, enc_in, 2 * count);
  const std::span<const double> z_all = enc_act.output();
  const auto zk = z_all.subspan(0, count * Z);
  const auto zk1 = z_all.subspan(count * Z, count * Z);

  const auto koop_act = nn::forward_batch(m.koopman.spec, m.koopman.params, zk, count);
  const std::span<const double> zp = koop_act.output();

  // Decoder on [z_k ; z_{k+1} ; K z_k] as one batch of 3*count.
  std::vector<double> z_dec(z_all.begin(), z_all.end());
  z_dec.insert(z_dec.end(), zp.begin(), zp.end());
  std::vector<double> p_three(p_both);
  p_three.insert(p_three.end(), p.begin(), p.end());
  const auto dec_in = detail::concat_rows(z_dec, Z, p_three, P, 3 * count);
  const auto dec_act = nn::forward_batch(m.decoder.spec, m.decoder.params, dec_in, 3 * count);
  const std::span<const double> r_all = dec_act.output();
  const auto r_recon = r_all.subspan(0, 2 * count * S);
  const auto r_pred = r_all.subspan(2 * count * S, count * S);

  LossTerms t;
  t.reconstruction = nn::mse(r_recon, x_both);
  t.linearity = nn::mse(zk1, zp);
  t.prediction = nn::mse(r_pred, xk1);
  t.total = w.lambda1 * t.reconstruction + w.lambda2 * t.linearity + w.lambda3 * t.prediction;
  if (!grads) return t;

  std::vector<double> d_r(r_all.size(), 0.0);
  nn::mse_grad_add(r_recon, x_both, w.lambda1, std::span<double>(d_r).subspan(0, 2 * count * S));
  nn::mse_grad_add(r_pred, xk1, w.lambda3, std::span<double>(d_r).subspan(2 * count * S, count * S));
  std::vector<double> d_dec_in;
  nn::backward_batch(m.decoder.spec, m.decoder.params, dec_act, d_r, grads->decoder, &d_dec_in);
  auto d_z = detail::leading_cols(d_dec_in, Z, P, 3 * count);  // [dz_k ; dz_{k+1} ; d(Kz_k)]

  std::span<double> d_zk(d_z.data(), count * Z);
  std::span<double> d_zk1(d_z.data() + count * Z, count * Z);
  std::span<double> d_zp(d_z.data() + 2 * count * Z, count * Z);
  nn::mse_grad_add(zk1, zp, w.lambda2, d_zk1);
  nn::mse_grad_add(zp, zk1, w.lambda2, d_zp);

  std::vector<double> d_zk_from_k;
  nn::backward_batch(m.koopman.spec, m.koopman.params, koop_act, d_zp, grads->koopman, &d_zk_from_k);
  for (std::size_t i = 0; i < d_zk.size(); ++i) d_zk[i] += d_zk_from_k[i];

  nn::backward_batch(m.encoder.spec, m.encoder.params, enc_act,
                     std::span<const double>(d_z.data(), 2 * count * Z), grads->encoder, nullptr);
  return t;
}

/// Multi-step loss anchored at the first state of each series:
///   L4 = mse(X_k, dec(K^k enc(X_0)))   for k = 1..horizon
/// `x0` is count x S, `targets` is count x horizon x S (row k-1 holds X_k),
/// all normalized. This is the latent rollout used for prediction, so it
/// also covers systems whose one-step map depends on absolute time.
inline double rollout_loss_normalized(const KoopmanModel& m, std::span<const double> x0,
                                      std::span<const double> targets, std::span<const double> p,
                                      std::size_t count, std::size_t horizon, double weight, ModelGrads* grads) {
  const std::size_t S = m.state_dim, Z = m.latent_dim, P = m.param_dim;
  if (count == 0 || horizon == 0 || x0.size() != count * S || targets.size() != count * horizon * S ||
      p.size() != count * P) {
    throw ConfigError("rollout_loss: inconsistent batch shapes");
  }
  const auto enc_in = detail::concat_rows(x0, S, p, P, count);
  const auto enc_act = nn::forward_batch(m.encoder.spec, m.encoder.params, enc_in, count);
  std::vector<nn::Activations> koop_acts;
  koop_acts.reserve(horizon);
  // Decoder batch is ordered (series, step) to match `targets`.
  std::vector<double> z_dec(count * horizon * Z);
  std::span<const double> z = enc_act.output();
  for (std::size_t k = 0; k < horizon; ++k) {
    koop_acts.push_back(nn::forward_batch(m.koopman.spec, m.koopman.params, z, count));
    z = koop_acts.back().output();
    for (std::size_t i = 0; i < count; ++i)
      std::copy_n(z.begin() + static_cast<std::ptrdiff_t>(i * Z), Z, z_dec.begin() + static_cast<std::ptrdiff_t>((i * horizon + k) * Z));
  }
  std::vector<double> p_rep;
  p_rep.reserve(count * horizon * P);
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t k = 0; k < horizon; ++k) p_rep.insert(p_rep.end(), p.begin() + static_cast<std::ptrdiff_t>(i * P), p.begin() + static_cast<std::ptrdiff_t>((i + 1) * P));
  const auto dec_in = detail::concat_rows(z_dec, Z, p_rep, P, count * horizon);
  const auto dec_act = nn::forward_batch(m.decoder.spec, m.decoder.params, dec_in, count * horizon);
  const double loss = nn::mse(dec_act.output(), targets);
  if (!grads) return loss;

  std::vector<double> d_r(count * horizon * S, 0.0);
  nn::mse_grad_add(dec_act.output(), targets, weight, d_r);
  std::vector<double> d_dec_in;
  nn::backward_batch(m.decoder.spec, m.decoder.params, dec_act, d_r, grads->decoder, &d_dec_in);
  const auto d_zdec = detail::leading_cols(d_dec_in, Z, P, count * horizon);
  std::vector<double> g(count * Z, 0.0), d_in;
  for (std::size_t k = horizon; k-- > 0;) {
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t j = 0; j < Z; ++j) g[i * Z + j] += d_zdec[(i * horizon + k) * Z + j];
    nn::backward_batch(m.koopman.spec, m.koopman.params, koop_acts[k], g, grads->koopman, &d_in);
    g.swap(d_in);
  }
  nn::backward_batch(m.encoder.spec, m.encoder.params, enc_act, g, grads->encoder, nullptr);
  return loss;
}

/// Composite loss on physical-unit pairs (normalized with the model's stats).
inline LossTerms composite_loss(const KoopmanModel& m, const PairBatch& batch, const LossWeights& w) {
  w.validate();
  detail::check_params_arg(m, batch.params, batch.count);
  const auto xk = m.state_norm.normalize(batch.current);
  const auto xk1 = m.state_norm.normalize(batch.next);
  const auto p = m.param_dim ? m.param_norm.normalize(batch.params) : std::vector<double>{};
  return composite_loss_normalized(m, xk, xk1, p, batch.count, w, nullptr);
}

}  // namespace kooprel::koopman
