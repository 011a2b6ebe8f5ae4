#include "rmsh/objective.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>

#include "rmsh/error.hpp"

namespace rmsh {

double relaxed_distance(const Eigen::VectorXd& z1, const Eigen::VectorXd& z2) {
  if (z1.size() != z2.size()) throw invalid_argument("relaxed_distance: code lengths differ");
  return (z1 - z2).squaredNorm() / 4.0;
}

double triplet_term(double d_ref_pos, double d_ref_neg, bool y_ref_pos, bool y_ref_neg,
                    double alpha, double delta) {
  if (d_ref_pos < 0.0 || d_ref_neg < 0.0) {
    throw invalid_argument("triplet_term: distances must be >= 0");
  }
  if (alpha < 0.0) throw invalid_argument("triplet_term: margin must be >= 0");
  if (delta < 1.0) throw invalid_argument("triplet_term: delta must be >= 1");
  double loss = 0.0;
  if (y_ref_pos && y_ref_neg) loss += std::max(0.0, d_ref_pos - d_ref_neg + alpha);
  if (!y_ref_pos) loss += std::max(0.0, delta - d_ref_pos);
  if (!y_ref_neg) loss += std::max(0.0, delta - d_ref_neg);
  return loss;
}

double classification_loss(const Eigen::VectorXd& label, const Eigen::VectorXd& pred,
                           double w_pos) {
  if (label.size() != pred.size()) {
    throw invalid_argument("classification_loss: label and prediction sizes differ");
  }
  if (w_pos < 0.0) throw invalid_argument("classification_loss: w_pos must be >= 0");
  double loss = 0.0;
  for (Eigen::Index j = 0; j < pred.size(); ++j) {
    if (!std::isfinite(pred(j))) {
      throw invalid_argument("classification_loss: non-finite prediction");
    }
    const double p = std::clamp(pred(j), kPredictionClamp, 1.0 - kPredictionClamp);
    loss -= w_pos * label(j) * std::log(p) + (1.0 - label(j)) * std::log1p(-p);
  }
  return loss;
}

double quantization_loss(const Eigen::MatrixXd& z, const Eigen::MatrixXd& b) {
  if (z.rows() != b.rows() || z.cols() != b.cols()) {
    throw invalid_argument("quantization_loss: shape mismatch");
  }
  const double* data = b.data();
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    if (data[i] != 1.0 && data[i] != -1.0) {
      throw invalid_argument("quantization_loss: binary codes must be +-1");
    }
  }
  return (z - b).squaredNorm();
}

namespace {

struct MemberLabel {
  std::vector<std::uint64_t> mask;
  int count = 0;
};

int inter_count(const MemberLabel& a, const MemberLabel& b) {
  int c = 0;
  for (std::size_t w = 0; w < a.mask.size(); ++w) {
    c += std::popcount(a.mask[w] & b.mask[w]);
  }
  return c;
}

// One code taking part in a grouping: where its relaxed code lives, where
// its gradient accumulates (null when gradients are off), its label, and its
// member number (the tie-break key for the reordering rule).
struct Participant {
  int member_no;
  const Eigen::MatrixXd* z;
  Eigen::MatrixXd* dz;
  Eigen::Index col;
  const MemberLabel* label;
};

void track_hinge(KinkReport* kinks, double arg) {
  if (kinks) kinks->min_hinge_gap = std::min(kinks->min_hinge_gap, std::abs(arg));
}

// Picks the grouping's anchor (largest label count, ties broken by member
// order), evaluates the ranking term against the other two members, and
// accumulates grad_scale times its gradient into the participants.
double eval_grouping(const std::array<Participant, 3>& g, double delta, double grad_scale,
                     KinkReport* kinks) {
  int ri = 0;
  for (int i = 1; i < 3; ++i) {
    if (g[i].label->count > g[ri].label->count ||
        (g[i].label->count == g[ri].label->count && g[i].member_no < g[ri].member_no)) {
      ri = i;
    }
  }
  int others[2];
  int n = 0;
  for (int i = 0; i < 3; ++i) {
    if (i != ri) others[n++] = i;
  }
  int pi = others[0];
  int ni = others[1];
  int inter_pos = inter_count(*g[ri].label, *g[pi].label);
  int inter_neg = inter_count(*g[ri].label, *g[ni].label);
  // The reference holds the grouping's maximum tag count, so similarity
  // order equals intersection-count order and the margin is never negative.
  if (inter_neg > inter_pos ||
      (inter_neg == inter_pos && g[ni].member_no < g[pi].member_no)) {
    std::swap(pi, ni);
    std::swap(inter_pos, inter_neg);
  }
  const bool y_pos = inter_pos > 0;
  const bool y_neg = inter_neg > 0;
  const double alpha =
      delta * static_cast<double>(inter_pos - inter_neg) / g[ri].label->count;

  const Eigen::VectorXd diff_rp = g[ri].z->col(g[ri].col) - g[pi].z->col(g[pi].col);
  const Eigen::VectorXd diff_rn = g[ri].z->col(g[ri].col) - g[ni].z->col(g[ni].col);
  const double d_rp = diff_rp.squaredNorm() / 4.0;
  const double d_rn = diff_rn.squaredNorm() / 4.0;

  const bool with_grad = g[ri].dz != nullptr && grad_scale != 0.0;
  double loss = 0.0;
  if (y_pos && y_neg) {
    const double arg = d_rp - d_rn + alpha;
    track_hinge(kinks, arg);
    if (arg > 0.0) {
      loss += arg;
      if (with_grad) {
        g[ri].dz->col(g[ri].col) += grad_scale * 0.5 * (diff_rp - diff_rn);
        g[pi].dz->col(g[pi].col) -= grad_scale * 0.5 * diff_rp;
        g[ni].dz->col(g[ni].col) += grad_scale * 0.5 * diff_rn;
      }
    }
  }
  if (!y_pos) {
    const double arg = delta - d_rp;
    track_hinge(kinks, arg);
    if (arg > 0.0) {
      loss += arg;
      if (with_grad) {
        g[ri].dz->col(g[ri].col) -= grad_scale * 0.5 * diff_rp;
        g[pi].dz->col(g[pi].col) += grad_scale * 0.5 * diff_rp;
      }
    }
  }
  if (!y_neg) {
    const double arg = delta - d_rn;
    track_hinge(kinks, arg);
    if (arg > 0.0) {
      loss += arg;
      if (with_grad) {
        g[ri].dz->col(g[ri].col) -= grad_scale * 0.5 * diff_rn;
        g[ni].dz->col(g[ni].col) += grad_scale * 0.5 * diff_rn;
      }
    }
  }
  return loss;
}

LossBreakdown evaluate(const HashModel& model, const TripletBatch& batch,
                       const LabelMatrix& labels, const ObjectiveConfig& cfg,
                       ModelGradients* grads, KinkReport* kinks) {
  if (!std::isfinite(cfg.delta) || cfg.delta < 1.0) {
    throw invalid_argument("objective config needs delta >= 1");
  }
  if (cfg.lambda1 < 0.0 || cfg.lambda2 < 0.0 || cfg.lambda3 < 0.0 || cfg.lambda4 < 0.0 ||
      cfg.w_pos < 0.0) {
    throw invalid_argument("loss weights must be >= 0");
  }
  const std::size_t trip_count = batch.triplets.size();
  if (trip_count == 0) throw invalid_argument("empty triplet batch");
  const auto cols = static_cast<Eigen::Index>(3 * trip_count);
  const auto tcols = static_cast<Eigen::Index>(trip_count);
  const int k = model.dims.code_bits;
  const int c = model.dims.tags;
  if (labels.tags() != static_cast<std::size_t>(c)) {
    throw invalid_argument("label tag count does not match the classifier");
  }
  if (batch.image_features.cols() != cols || batch.text_features.cols() != cols) {
    throw invalid_argument("feature batches must carry 3 columns per triplet");
  }
  if (batch.codes.rows() != k || batch.codes.cols() != cols) {
    throw invalid_argument("unified code batch must be code_bits x 3T");
  }
  {
    const double* data = batch.codes.data();
    for (Eigen::Index i = 0; i < batch.codes.size(); ++i) {
      if (data[i] != 1.0 && data[i] != -1.0) {
        throw invalid_argument("unified codes must be +-1");
      }
    }
  }
  for (const Triplet& t : batch.triplets) {
    if (t.ref_index >= labels.rows() || t.pos_index >= labels.rows() ||
        t.neg_index >= labels.rows()) {
      throw invalid_argument("triplet index out of range of the label matrix");
    }
  }

  // Forward: heads, then the four fusions of each triplet's (ref, pos) pair,
  // then one classifier pass over every code produced.
  HeadTrace img = forward_head(model, Modality::kImage, batch.image_features);
  HeadTrace txt = forward_head(model, Modality::kText, batch.text_features);

  Eigen::MatrixXd img_ref(k, tcols), img_pos(k, tcols), txt_ref(k, tcols), txt_pos(k, tcols);
  for (Eigen::Index t = 0; t < tcols; ++t) {
    img_ref.col(t) = img.z.col(3 * t);
    img_pos.col(t) = img.z.col(3 * t + 1);
    txt_ref.col(t) = txt.z.col(3 * t);
    txt_pos.col(t) = txt.z.col(3 * t + 1);
  }
  PcnTrace img_u = forward_pcn(model, FusionOp::kUnion, img_ref, img_pos);
  PcnTrace img_t = forward_pcn(model, FusionOp::kIntersect, img_ref, img_pos);
  PcnTrace txt_u = forward_pcn(model, FusionOp::kUnion, txt_ref, txt_pos);
  PcnTrace txt_t = forward_pcn(model, FusionOp::kIntersect, txt_ref, txt_pos);

  Eigen::MatrixXd cls_in(k, 2 * cols + 4 * tcols);
  cls_in.block(0, 0, k, cols) = img.z;
  cls_in.block(0, cols, k, cols) = txt.z;
  cls_in.block(0, 2 * cols, k, tcols) = img_u.z;
  cls_in.block(0, 2 * cols + tcols, k, tcols) = img_t.z;
  cls_in.block(0, 2 * cols + 2 * tcols, k, tcols) = txt_u.z;
  cls_in.block(0, 2 * cols + 3 * tcols, k, tcols) = txt_t.z;
  ClassifierTrace ct = forward_classifier(model, cls_in);

  // Labels of the five members of each triplet: the three real rows plus the
  // union and intersection pseudo-labels of (ref, pos).
  const std::size_t words = labels.mask_words();
  std::vector<std::array<MemberLabel, 5>> mls(trip_count);
  for (std::size_t t = 0; t < trip_count; ++t) {
    const std::uint32_t rows[3] = {batch.triplets[t].ref_index, batch.triplets[t].pos_index,
                                   batch.triplets[t].neg_index};
    for (int m = 0; m < 3; ++m) {
      const auto mask = labels.mask(rows[m]);
      mls[t][m].mask.assign(mask.begin(), mask.end());
      mls[t][m].count = labels.tag_count(rows[m]);
    }
    mls[t][3].mask.resize(words);
    mls[t][4].mask.resize(words);
    for (std::size_t w = 0; w < words; ++w) {
      mls[t][3].mask[w] = mls[t][0].mask[w] | mls[t][1].mask[w];
      mls[t][4].mask[w] = mls[t][0].mask[w] & mls[t][1].mask[w];
    }
    for (int m = 3; m < 5; ++m) {
      int cnt = 0;
      for (std::uint64_t w : mls[t][m].mask) cnt += std::popcount(w);
      mls[t][m].count = cnt;
    }
  }

  LossBreakdown out;
  out.lambda1 = cfg.lambda1;
  out.lambda2 = cfg.lambda2;
  out.lambda3 = cfg.lambda3;
  out.lambda4 = cfg.lambda4;
  out.w_pos = cfg.w_pos;
  out.delta = cfg.delta;

  Eigen::MatrixXd dprobs;
  if (grads) dprobs = Eigen::MatrixXd::Zero(c, ct.probs.cols());

  // Classification of every code; `weight` is the code's factor in the
  // total (1 for real codes, lambda3 for pseudo-codes) and scales only the
  // gradient — the breakdown keeps unweighted sums.
  const auto classify_column = [&](Eigen::Index col, const MemberLabel& ml, double weight,
                                   double& sink) {
    double loss = 0.0;
    for (int j = 0; j < c; ++j) {
      const bool tag = (ml.mask[static_cast<std::size_t>(j) / 64] >> (j % 64)) & 1;
      const double p_raw = ct.probs(j, col);
      const double p = std::clamp(p_raw, kPredictionClamp, 1.0 - kPredictionClamp);
      if (kinks) {
        kinks->min_clamp_gap =
            std::min({kinks->min_clamp_gap, std::abs(p_raw - kPredictionClamp),
                      std::abs(1.0 - kPredictionClamp - p_raw)});
      }
      loss -= tag ? cfg.w_pos * std::log(p) : std::log1p(-p);
      if (grads && p_raw > kPredictionClamp && p_raw < 1.0 - kPredictionClamp) {
        dprobs(j, col) = weight * (tag ? -cfg.w_pos / p : 1.0 / (1.0 - p));
      }
    }
    sink += loss;
  };
  for (Eigen::Index t = 0; t < tcols; ++t) {
    for (Eigen::Index m = 0; m < 3; ++m) {
      classify_column(3 * t + m, mls[t][m], 1.0, out.classification_real);
      classify_column(cols + 3 * t + m, mls[t][m], 1.0, out.classification_real);
    }
    classify_column(2 * cols + t, mls[t][3], cfg.lambda3, out.classification_pseudo);
    classify_column(2 * cols + tcols + t, mls[t][4], cfg.lambda3, out.classification_pseudo);
    classify_column(2 * cols + 2 * tcols + t, mls[t][3], cfg.lambda3,
                    out.classification_pseudo);
    classify_column(2 * cols + 3 * tcols + t, mls[t][4], cfg.lambda3,
                    out.classification_pseudo);
  }

  // Ranking groupings. Gradients first accumulate against each forward
  // output, then flow through the network blocks below.
  Eigen::MatrixXd d_img_z, d_txt_z, d_img_u, d_img_t, d_txt_u, d_txt_t;
  if (grads) {
    d_img_z = Eigen::MatrixXd::Zero(k, cols);
    d_txt_z = Eigen::MatrixXd::Zero(k, cols);
    d_img_u = Eigen::MatrixXd::Zero(k, tcols);
    d_img_t = Eigen::MatrixXd::Zero(k, tcols);
    d_txt_u = Eigen::MatrixXd::Zero(k, tcols);
    d_txt_t = Eigen::MatrixXd::Zero(k, tcols);
  }
  const auto member = [&](int member_no, bool image_side, Eigen::Index t) -> Participant {
    Participant p;
    p.member_no = member_no;
    p.label = &mls[static_cast<std::size_t>(t)][member_no - 1];
    if (member_no <= 3) {
      p.z = image_side ? &img.z : &txt.z;
      p.dz = !grads ? nullptr : (image_side ? &d_img_z : &d_txt_z);
      p.col = 3 * t + (member_no - 1);
    } else if (member_no == 4) {
      p.z = image_side ? &img_u.z : &txt_u.z;
      p.dz = !grads ? nullptr : (image_side ? &d_img_u : &d_txt_u);
      p.col = t;
    } else {
      p.z = image_side ? &img_t.z : &txt_t.z;
      p.dz = !grads ? nullptr : (image_side ? &d_img_t : &d_txt_t);
      p.col = t;
    }
    return p;
  };
  for (Eigen::Index t = 0; t < tcols; ++t) {
    for (int side = 0; side < 2; ++side) {
      const bool primary_image = side == 0;
      for (int i = 3; i <= 5; ++i) {
        out.triplet_intra += eval_grouping({member(1, primary_image, t),
                                            member(2, primary_image, t),
                                            member(i, primary_image, t)},
                                           cfg.delta, cfg.lambda1, kinks);
      }
      // The anchor code comes from the opposite modality. With kTextAnchor
      // only the image-primary direction (text anchors) is kept.
      if (cfg.inter_direction == InterDirection::kBoth || primary_image) {
        out.triplet_inter += eval_grouping({member(1, !primary_image, t),
                                            member(2, primary_image, t),
                                            member(3, primary_image, t)},
                                           cfg.delta, cfg.lambda2, kinks);
        out.triplet_inter += eval_grouping({member(2, !primary_image, t),
                                            member(1, primary_image, t),
                                            member(3, primary_image, t)},
                                           cfg.delta, cfg.lambda2, kinks);
        out.triplet_inter += eval_grouping({member(3, !primary_image, t),
                                            member(1, primary_image, t),
                                            member(2, primary_image, t)},
                                           cfg.delta, cfg.lambda2, kinks);
      }
    }
  }

  out.quantization =
      (img.z - batch.codes).squaredNorm() + (txt.z - batch.codes).squaredNorm();
  if (grads) {
    d_img_z += cfg.lambda4 * 2.0 * (img.z - batch.codes);
    d_txt_z += cfg.lambda4 * 2.0 * (txt.z - batch.codes);
  }

  out.total = out.classification_real + cfg.lambda3 * out.classification_pseudo +
              cfg.lambda1 * out.triplet_intra + cfg.lambda2 * out.triplet_inter +
              cfg.lambda4 * out.quantization;

  if (grads) {
    const Eigen::MatrixXd d_cls_in = backward_classifier(model, ct, dprobs, *grads);
    d_img_z += d_cls_in.block(0, 0, k, cols);
    d_txt_z += d_cls_in.block(0, cols, k, cols);
    d_img_u += d_cls_in.block(0, 2 * cols, k, tcols);
    d_img_t += d_cls_in.block(0, 2 * cols + tcols, k, tcols);
    d_txt_u += d_cls_in.block(0, 2 * cols + 2 * tcols, k, tcols);
    d_txt_t += d_cls_in.block(0, 2 * cols + 3 * tcols, k, tcols);

    const auto fuse_back = [&](FusionOp op, const PcnTrace& trace, const Eigen::MatrixXd& dz,
                               Eigen::MatrixXd& d_head_z) {
      const Eigen::MatrixXd dcat = backward_pcn(model, op, trace, dz, *grads);
      for (Eigen::Index t = 0; t < tcols; ++t) {
        d_head_z.col(3 * t) += dcat.col(t).head(k);
        d_head_z.col(3 * t + 1) += dcat.col(t).tail(k);
      }
    };
    fuse_back(FusionOp::kUnion, img_u, d_img_u, d_img_z);
    fuse_back(FusionOp::kIntersect, img_t, d_img_t, d_img_z);
    fuse_back(FusionOp::kUnion, txt_u, d_txt_u, d_txt_z);
    fuse_back(FusionOp::kIntersect, txt_t, d_txt_t, d_txt_z);

    backward_head(model, Modality::kImage, img, d_img_z, *grads);
    backward_head(model, Modality::kText, txt, d_txt_z, *grads);
  }
  return out;
}

}  // namespace

LossBreakdown total_loss(const HashModel& model, const TripletBatch& batch,
                         const LabelMatrix& labels, const ObjectiveConfig& cfg,
                         KinkReport* kinks) {
  return evaluate(model, batch, labels, cfg, nullptr, kinks);
}

LossBreakdown total_loss_backward(const HashModel& model, const TripletBatch& batch,
                                  const LabelMatrix& labels, const ObjectiveConfig& cfg,
                                  ModelGradients& grads, KinkReport* kinks) {
  return evaluate(model, batch, labels, cfg, &grads, kinks);
}

}  // namespace rmsh
