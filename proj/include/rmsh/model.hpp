#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "rmsh/features.hpp"

namespace rmsh {

struct ModelDims {
  int dim_image = 0;
  int dim_text = 0;
  int hidden = 64;
  int code_bits = 16;
  int tags = 0;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// One dense layer; b is kept as an out x 1 matrix so every parameter tensor
// has the same type and can be visited uniformly by the optimizer and the
// checkpoint writer.
struct Affine {
  Eigen::MatrixXd W;
  Eigen::MatrixXd b;
};

// Two modality heads (affine -> tanh -> affine -> tanh), a pseudo-codes
// network (one bias-free affine + tanh per fusion op, input is the
// concatenation of two codes), and a shared classifier (affine -> sigmoid).
struct HashModel {
  ModelDims dims;
  Affine img1, img2;
  Affine txt1, txt2;
  Eigen::MatrixXd pcn_union;      // K x 2K
  Eigen::MatrixXd pcn_intersect;  // K x 2K
  Affine cls;                     // C x K
};

// Gradient buffers shaped exactly like the model's parameters.
struct ModelGradients {
  Affine img1, img2;
  Affine txt1, txt2;
  Eigen::MatrixXd pcn_union;
  Eigen::MatrixXd pcn_intersect;
  Affine cls;

  static ModelGradients zeros_like(const HashModel& m);
  void set_zero();
};

// Named view over the parameter tensors in a fixed order. The same order is
// used by init_model, the optimizer's moment buffers, and the checkpoint
// format, so it must never change.
struct TensorRef {
  const char* name;
  Eigen::MatrixXd* tensor;
};
struct ConstTensorRef {
  const char* name;
  const Eigen::MatrixXd* tensor;
};
std::vector<TensorRef> tensors(HashModel& m);
std::vector<ConstTensorRef> tensors(const HashModel& m);
std::vector<TensorRef> tensors(ModelGradients& g);
std::vector<ConstTensorRef> tensors(const ModelGradients& g);

// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
HashModel init_model(const ModelDims& dims, std::uint64_t seed);

enum class FusionOp { kUnion, kIntersect };

// Forward passes cache the activations their backward passes need. Batches
// are column-per-sample.
struct HeadTrace {
  Eigen::MatrixXd input;   // D x B
  Eigen::MatrixXd hidden;  // H x B, post-tanh
  Eigen::MatrixXd z;       // K x B, post-tanh
};
struct PcnTrace {
  Eigen::MatrixXd input;  // 2K x B, [z1; z2]
  Eigen::MatrixXd z;      // K x B, post-tanh
};
struct ClassifierTrace {
  Eigen::MatrixXd input;  // K x B
  Eigen::MatrixXd probs;  // C x B, sigmoid outputs
};

HeadTrace forward_head(const HashModel& m, Modality mod, const Eigen::MatrixXd& features);
PcnTrace forward_pcn(const HashModel& m, FusionOp op, const Eigen::MatrixXd& z1,
                     const Eigen::MatrixXd& z2);
ClassifierTrace forward_classifier(const HashModel& m, const Eigen::MatrixXd& z);

// +1 where z >= 0, -1 where z < 0.
Eigen::MatrixXd binarize(const Eigen::MatrixXd& z);

// Each backward consumes dL/d(output), accumulates parameter gradients into
// g, and returns dL/d(input) so the caller can keep walking the graph. For
// the PCN the returned matrix is 2K x B; rows [0,K) belong to z1 and rows
// [K,2K) to z2.
Eigen::MatrixXd backward_classifier(const HashModel& m, const ClassifierTrace& t,
                                    const Eigen::MatrixXd& dprobs, ModelGradients& g);
Eigen::MatrixXd backward_pcn(const HashModel& m, FusionOp op, const PcnTrace& t,
                             const Eigen::MatrixXd& dz, ModelGradients& g);
Eigen::MatrixXd backward_head(const HashModel& m, Modality mod, const HeadTrace& t,
                              const Eigen::MatrixXd& dz, ModelGradients& g);

// Checkpoint: magic "RMSHMODL", five u32 dims (dim_image, dim_text, hidden,
// code_bits, tags), then every tensor in tensors() order as row-major
// little-endian f32.
void save_model(const std::string& path, const HashModel& m);
HashModel load_model(const std::string& path);

}  // namespace rmsh
