#include "rmsh/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "rmsh/error.hpp"
#include "rmsh/rng.hpp"

namespace rmsh {

namespace {

Eigen::MatrixXd affine_forward(const Affine& layer, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out = layer.W * x;
  out.colwise() += layer.b.col(0);
  return out;
}

// Accumulates the layer's gradients and returns dL/d(input).
Eigen::MatrixXd affine_backward(const Affine& layer, const Eigen::MatrixXd& input,
                                const Eigen::MatrixXd& dout, Affine& grad) {
  grad.W += dout * input.transpose();
  grad.b.col(0) += dout.rowwise().sum();
  return layer.W.transpose() * dout;
}

Eigen::MatrixXd tanh_of(const Eigen::MatrixXd& pre) { return pre.array().tanh().matrix(); }

// dL/d(pre-activation) given dL/d(tanh output) and the cached output.
Eigen::MatrixXd tanh_backward(const Eigen::MatrixXd& z, const Eigen::MatrixXd& dz) {
  return (dz.array() * (1.0 - z.array().square())).matrix();
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_dims(const ModelDims& d) {
  if (d.dim_image < 1 || d.dim_text < 1 || d.hidden < 1 || d.code_bits < 1 || d.tags < 1) {
    throw invalid_argument("model dimensions must all be positive");
  }
}

}  // namespace

ModelGradients ModelGradients::zeros_like(const HashModel& m) {
  ModelGradients g;
  const auto zeros = [](const Eigen::MatrixXd& t) {
    return Eigen::MatrixXd::Zero(t.rows(), t.cols()).eval();
  };
  g.img1 = {zeros(m.img1.W), zeros(m.img1.b)};
  g.img2 = {zeros(m.img2.W), zeros(m.img2.b)};
  g.txt1 = {zeros(m.txt1.W), zeros(m.txt1.b)};
  g.txt2 = {zeros(m.txt2.W), zeros(m.txt2.b)};
  g.pcn_union = zeros(m.pcn_union);
  g.pcn_intersect = zeros(m.pcn_intersect);
  g.cls = {zeros(m.cls.W), zeros(m.cls.b)};
  return g;
}

void ModelGradients::set_zero() {
  for (const TensorRef& ref : tensors(*this)) ref.tensor->setZero();
}

namespace {

template <typename Model, typename Ref, typename Mat>
std::vector<Ref> tensor_list(Model& m) {
  std::vector<Ref> out;
  const auto add = [&out](const char* name, Mat* t) { out.push_back({name, t}); };
  add("img1.W", &m.img1.W);
  add("img1.b", &m.img1.b);
  add("img2.W", &m.img2.W);
  add("img2.b", &m.img2.b);
  add("txt1.W", &m.txt1.W);
  add("txt1.b", &m.txt1.b);
  add("txt2.W", &m.txt2.W);
  add("txt2.b", &m.txt2.b);
  add("pcn_union.W", &m.pcn_union);
  add("pcn_intersect.W", &m.pcn_intersect);
  add("cls.W", &m.cls.W);
  add("cls.b", &m.cls.b);
  return out;
}

}  // namespace

std::vector<TensorRef> tensors(HashModel& m) {
  return tensor_list<HashModel, TensorRef, Eigen::MatrixXd>(m);
}
std::vector<ConstTensorRef> tensors(const HashModel& m) {
  return tensor_list<const HashModel, ConstTensorRef, const Eigen::MatrixXd>(m);
}
std::vector<TensorRef> tensors(ModelGradients& g) {
  return tensor_list<ModelGradients, TensorRef, Eigen::MatrixXd>(g);
}
std::vector<ConstTensorRef> tensors(const ModelGradients& g) {
  return tensor_list<const ModelGradients, ConstTensorRef, const Eigen::MatrixXd>(g);
}

HashModel init_model(const ModelDims& dims, std::uint64_t seed) {
  check_dims(dims);
  HashModel m;
  m.dims = dims;
  const int h = dims.hidden;
  const int k = dims.code_bits;
  m.img1 = {Eigen::MatrixXd(h, dims.dim_image), Eigen::MatrixXd::Zero(h, 1)};
  m.img2 = {Eigen::MatrixXd(k, h), Eigen::MatrixXd::Zero(k, 1)};
  m.txt1 = {Eigen::MatrixXd(h, dims.dim_text), Eigen::MatrixXd::Zero(h, 1)};
  m.txt2 = {Eigen::MatrixXd(k, h), Eigen::MatrixXd::Zero(k, 1)};
  m.pcn_union = Eigen::MatrixXd(k, 2 * k);
  m.pcn_intersect = Eigen::MatrixXd(k, 2 * k);
  m.cls = {Eigen::MatrixXd(dims.tags, k), Eigen::MatrixXd::Zero(dims.tags, 1)};

  Rng rng(seed);
  Eigen::MatrixXd* weights[] = {&m.img1.W,      &m.img2.W,         &m.txt1.W, &m.txt2.W,
                                &m.pcn_union,   &m.pcn_intersect,  &m.cls.W};
  for (Eigen::MatrixXd* w : weights) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(w->cols()));
    double* data = w->data();
    for (Eigen::Index i = 0; i < w->size(); ++i) data[i] = rng.uniform(-scale, scale);
  }
  return m;
}

HeadTrace forward_head(const HashModel& m, Modality mod, const Eigen::MatrixXd& features) {
  const Affine& l1 = mod == Modality::kImage ? m.img1 : m.txt1;
  const Affine& l2 = mod == Modality::kImage ? m.img2 : m.txt2;
  if (features.rows() != l1.W.cols()) {
    throw invalid_argument("feature dimension " + std::to_string(features.rows()) +
                           " does not match the " + std::string(modality_name(mod)) +
                           " head input " + std::to_string(l1.W.cols()));
  }
  HeadTrace t;
  t.input = features;
  t.hidden = tanh_of(affine_forward(l1, features));
  t.z = tanh_of(affine_forward(l2, t.hidden));
  return t;
}

PcnTrace forward_pcn(const HashModel& m, FusionOp op, const Eigen::MatrixXd& z1,
                     const Eigen::MatrixXd& z2) {
  const int k = m.dims.code_bits;
  if (z1.rows() != k || z2.rows() != k) {
    throw invalid_argument("fusion inputs must both have " + std::to_string(k) + " rows");
  }
  if (z1.cols() != z2.cols()) throw invalid_argument("fusion inputs must have equal batch size");
  const Eigen::MatrixXd& w = op == FusionOp::kUnion ? m.pcn_union : m.pcn_intersect;
  PcnTrace t;
  t.input.resize(2 * k, z1.cols());
  t.input.topRows(k) = z1;
  t.input.bottomRows(k) = z2;
  t.z = tanh_of(w * t.input);
  return t;
}

ClassifierTrace forward_classifier(const HashModel& m, const Eigen::MatrixXd& z) {
  if (z.rows() != m.dims.code_bits) {
    throw invalid_argument("classifier input must have " + std::to_string(m.dims.code_bits) +
                           " rows");
  }
  ClassifierTrace t;
  t.input = z;
  t.probs = affine_forward(m.cls, z).unaryExpr([](double v) { return stable_sigmoid(v); });
  return t;
}

Eigen::MatrixXd binarize(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
}

Eigen::MatrixXd backward_classifier(const HashModel& m, const ClassifierTrace& t,
                                    const Eigen::MatrixXd& dprobs, ModelGradients& g) {
  const Eigen::MatrixXd dlogits =
      (dprobs.array() * t.probs.array() * (1.0 - t.probs.array())).matrix();
  return affine_backward(m.cls, t.input, dlogits, g.cls);
}

Eigen::MatrixXd backward_pcn(const HashModel& m, FusionOp op, const PcnTrace& t,
                             const Eigen::MatrixXd& dz, ModelGradients& g) {
  const Eigen::MatrixXd& w = op == FusionOp::kUnion ? m.pcn_union : m.pcn_intersect;
  Eigen::MatrixXd& gw = op == FusionOp::kUnion ? g.pcn_union : g.pcn_intersect;
  const Eigen::MatrixXd dpre = tanh_backward(t.z, dz);
  gw += dpre * t.input.transpose();
  return w.transpose() * dpre;
}

Eigen::MatrixXd backward_head(const HashModel& m, Modality mod, const HeadTrace& t,
                              const Eigen::MatrixXd& dz, ModelGradients& g) {
  const Affine& l1 = mod == Modality::kImage ? m.img1 : m.txt1;
  const Affine& l2 = mod == Modality::kImage ? m.img2 : m.txt2;
  Affine& g1 = mod == Modality::kImage ? g.img1 : g.txt1;
  Affine& g2 = mod == Modality::kImage ? g.img2 : g.txt2;
  const Eigen::MatrixXd dhidden = affine_backward(l2, t.hidden, tanh_backward(t.z, dz), g2);
  return affine_backward(l1, t.input, tanh_backward(t.hidden, dhidden), g1);
}

namespace {

constexpr char kModelMagic[8] = {'R', 'M', 'S', 'H', 'M', 'O', 'D', 'L'};

void write_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), 4);
}

std::uint32_t read_u32(std::ifstream& in, const std::string& what) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (in.gcount() != 4) throw io_error("truncated model file while reading " + what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

void write_f32(std::ofstream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(out, bits);
}

float read_f32(std::ifstream& in, const std::string& what) {
  const std::uint32_t bits = read_u32(in, what);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void save_model(const std::string& path, const HashModel& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot create file: " + path);
  out.write(kModelMagic, sizeof(kModelMagic));
  write_u32(out, static_cast<std::uint32_t>(m.dims.dim_image));
  write_u32(out, static_cast<std::uint32_t>(m.dims.dim_text));
  write_u32(out, static_cast<std::uint32_t>(m.dims.hidden));
  write_u32(out, static_cast<std::uint32_t>(m.dims.code_bits));
  write_u32(out, static_cast<std::uint32_t>(m.dims.tags));
  for (const ConstTensorRef& ref : tensors(m)) {
    const Eigen::MatrixXd& t = *ref.tensor;
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) write_f32(out, static_cast<float>(t(r, c)));
    }
  }
  if (!out) throw io_error("write failed: " + path);
}

HashModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open file: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (in.gcount() != sizeof(magic) || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0) {
    throw io_error("bad magic in model file: " + path);
  }
  ModelDims dims;
  dims.dim_image = static_cast<int>(read_u32(in, "dim_image"));
  dims.dim_text = static_cast<int>(read_u32(in, "dim_text"));
  dims.hidden = static_cast<int>(read_u32(in, "hidden"));
  dims.code_bits = static_cast<int>(read_u32(in, "code_bits"));
  dims.tags = static_cast<int>(read_u32(in, "tags"));
  if (dims.dim_image < 1 || dims.dim_text < 1 || dims.hidden < 1 || dims.code_bits < 1 ||
      dims.tags < 1 || dims.dim_image > (1 << 24) || dims.dim_text > (1 << 24) ||
      dims.hidden > (1 << 24) || dims.code_bits > (1 << 20) || dims.tags > (1 << 20)) {
    throw io_error("model file declares implausible dimensions: " + path);
  }
  HashModel m = init_model(dims, 0);
  for (const TensorRef& ref : tensors(m)) {
    Eigen::MatrixXd& t = *ref.tensor;
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        const float v = read_f32(in, std::string(ref.name));
        if (!std::isfinite(v)) {
          throw io_error("non-finite value in model tensor " + std::string(ref.name));
        }
        t(r, c) = static_cast<double>(v);
      }
    }
  }
  in.peek();
  if (!in.eof()) throw io_error("trailing data after model tensors: " + path);
  return m;
}

}  // namespace rmsh
