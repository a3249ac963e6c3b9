#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "mpe/scorer.hpp"

namespace mpe {

namespace {

using Mat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const Mat>;
using ConstRowVec = Eigen::Map<const Eigen::RowVectorXf>;

ConstMatMap matrix(const ScorerWeights& w, const std::string& name) {
  const Tensor& t = w.at(name);
  return ConstMatMap(t.data.data(), static_cast<Eigen::Index>(t.shape[0]),
                     static_cast<Eigen::Index>(t.shape[1]));
}

ConstRowVec bias(const ScorerWeights& w, const std::string& name) {
  const Tensor& t = w.at(name);
  return ConstRowVec(t.data.data(), static_cast<Eigen::Index>(t.data.size()));
}

Mat linear(const Mat& x, const ScorerWeights& w, const std::string& wname, const std::string& bname) {
  Mat y = x * matrix(w, wname);
  y.rowwise() += bias(w, bname);
  return y;
}

Mat gather_rows(const ConstMatMap& table, std::span<const std::size_t> tokens) {
  Mat out(static_cast<Eigen::Index>(tokens.size()), table.cols());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] >= static_cast<std::size_t>(table.rows()))
      throw WeightFormatError(
          fmt::format("token {} outside embedding table of {} rows", tokens[i], table.rows()));
    out.row(static_cast<Eigen::Index>(i)) = table.row(static_cast<Eigen::Index>(tokens[i]));
  }
  return out;
}

}  // namespace

std::vector<double> neural_forward_tokens(const ScorerWeights& w,
                                          std::span<const std::size_t> state_tokens,
                                          std::span<const std::size_t> move_tokens) {
  if (move_tokens.empty()) throw ContractViolation("neural_forward: empty move list");
  if (state_tokens.empty()) throw ContractViolation("neural_forward: empty state");
  const auto& meta = w.meta;
  const auto d = static_cast<Eigen::Index>(meta.d_model);
  const auto heads = static_cast<Eigen::Index>(meta.n_heads);
  const Eigen::Index dh = d / heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));

  const ConstMatMap embed = matrix(w, "embed");
  const Mat state = gather_rows(embed, state_tokens);
  const Mat move_raw = gather_rows(embed, move_tokens);

  Mat h = move_raw;
  for (std::size_t l = 0; l < meta.n_attn_layers; ++l) {
    const std::string p = fmt::format("attn.{}.", l);
    const Mat q = linear(h, w, p + "wq", p + "bq");
    const Mat k = linear(state, w, p + "wk", p + "bk");
    const Mat v = linear(state, w, p + "wv", p + "bv");
    Mat concat(h.rows(), d);
    for (Eigen::Index head = 0; head < heads; ++head) {
      const Eigen::Index c0 = head * dh;
      Mat scores = (q.middleCols(c0, dh) * k.middleCols(c0, dh).transpose()) * scale;
      for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        auto row = scores.row(r);
        row = (row.array() - row.maxCoeff()).exp();
        row /= row.sum();
      }
      concat.middleCols(c0, dh) = scores * v.middleCols(c0, dh);
    }
    h = linear(concat, w, p + "wo", p + "bo");
  }

  Mat joined(h.rows(), 2 * d);
  joined.leftCols(d) = h;
  joined.rightCols(d) = move_raw;
  Mat z = linear(joined, w, "enc.in.w", "enc.in.b").cwiseMax(0.0f);
  for (std::size_t b = 0; b < meta.n_ffn_blocks; ++b) {
    const std::string p = fmt::format("enc.{}.", b);
    const Mat inner = linear(z, w, p + "w1", p + "b1").cwiseMax(0.0f);
    z = (z + linear(inner, w, p + "w2", p + "b2")).cwiseMax(0.0f);
  }
  const Mat logits = linear(z, w, "head.w", "head.b");

  std::vector<double> out(move_tokens.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double logit = logits(static_cast<Eigen::Index>(i), 0);
    out[i] = 1.0 / (1.0 + std::exp(-logit));
  }
  return out;
}

}  // namespace mpe
