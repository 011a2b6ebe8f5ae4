#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "rmsh/labels.hpp"
#include "rmsh/model.hpp"
#include "rmsh/triplets.hpp"

namespace rmsh {

// Which inter-modal triplet groupings enter the ranking loss. kBoth pairs
// each modality's anchors with the other modality's codes (the default);
// kTextAnchor keeps only the text-anchor / image-pair groupings.
enum class InterDirection { kBoth, kTextAnchor };

struct ObjectiveConfig {
  double lambda1 = 0.01;  // intra-modal triplet weight
  double lambda2 = 0.1;   // inter-modal triplet weight
  double lambda3 = 0.1;   // pseudo-code classification weight
  double lambda4 = 0.1;   // quantization weight
  double w_pos = 20.0;    // positive-tag weight in the classification loss
  double delta = 1.0;     // robust distance parameter, >= 1
  InterDirection inter_direction = InterDirection::kBoth;
};

// Component sums are stored unweighted; total applies the weights, so
// total = cls_real + l3*cls_pseudo + l1*tr_intra + l2*tr_inter + l4*quant.
struct LossBreakdown {
  double triplet_intra = 0.0;
  double triplet_inter = 0.0;
  double classification_real = 0.0;
  double classification_pseudo = 0.0;
  double quantization = 0.0;
  double total = 0.0;
  // Weights the evaluation used, echoed for logging.
  double lambda1 = 0.0, lambda2 = 0.0, lambda3 = 0.0, lambda4 = 0.0;
  double w_pos = 0.0, delta = 0.0;
};

// Distance to the nearest non-smooth point seen while evaluating the loss:
// hinge arguments that carry a nonzero coefficient and prediction clamp
// boundaries. Finite-difference tests resample when a kink is within reach
// of the probe step.
struct KinkReport {
  double min_hinge_gap = std::numeric_limits<double>::infinity();
  double min_clamp_gap = std::numeric_limits<double>::infinity();
};

// ||z1 - z2||^2 / 4; equals the Hamming distance on exact +-1 codes.
double relaxed_distance(const Eigen::VectorXd& z1, const Eigen::VectorXd& z2);

// y_rp*y_rn*[d_rp - d_rn + alpha]_+ + (1-y_rp)*[delta - d_rp]_+
//   + (1-y_rn)*[delta - d_rn]_+
double triplet_term(double d_ref_pos, double d_ref_neg, bool y_ref_pos, bool y_ref_neg,
                    double alpha, double delta);

// -sum_j ( w_pos*l_j*ln(p_j) + (1-l_j)*ln(1-p_j) ), predictions clamped to
// [kPredictionClamp, 1-kPredictionClamp].
inline constexpr double kPredictionClamp = 1e-7;
double classification_loss(const Eigen::VectorXd& label, const Eigen::VectorXd& pred,
                           double w_pos);

// sum over the batch of ||z_col - b_col||^2; b must be +-1.
double quantization_loss(const Eigen::MatrixXd& z, const Eigen::MatrixXd& b);

// One batch of T triplets. Columns 3t, 3t+1, 3t+2 hold the (ref, pos, neg)
// members of triplet t; `codes` carries the unified binary codes of the same
// members for the quantization term.
struct TripletBatch {
  std::vector<Triplet> triplets;
  Eigen::MatrixXd image_features;  // D_x x 3T
  Eigen::MatrixXd text_features;   // D_y x 3T
  Eigen::MatrixXd codes;           // K x 3T, entries +-1
};

// Full objective on one batch: classification of the six real and four
// pseudo codes, the intra/inter triplet groupings of both modality
// directions, and quantization against the unified codes.
LossBreakdown total_loss(const HashModel& model, const TripletBatch& batch,
                         const LabelMatrix& labels, const ObjectiveConfig& cfg,
                         KinkReport* kinks = nullptr);

// Same evaluation plus exact reverse-mode gradients of the weighted total,
// accumulated into `grads`.
LossBreakdown total_loss_backward(const HashModel& model, const TripletBatch& batch,
                                  const LabelMatrix& labels, const ObjectiveConfig& cfg,
                                  ModelGradients& grads, KinkReport* kinks = nullptr);

}  // namespace rmsh
