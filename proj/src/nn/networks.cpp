#include "vhist/nn/networks.hpp"

#include <algorithm>

namespace vhist::nn {

namespace F = torch::nn::functional;
using torch::nn::Conv2d;
using torch::nn::Conv2dOptions;
using torch::nn::InstanceNorm2d;
using torch::nn::InstanceNorm2dOptions;

namespace {

InstanceNorm2d instance_norm(int channels) { return InstanceNorm2d(InstanceNorm2dOptions(channels)); }

torch::nn::ReflectionPad2d reflect(int p) { return torch::nn::ReflectionPad2d(torch::nn::ReflectionPad2dOptions(p)); }

}  // namespace

ResidualBlockImpl::ResidualBlockImpl(int c) {
  body = register_module(
      "body", torch::nn::Sequential(reflect(1), Conv2d(Conv2dOptions(c, c, 3)), instance_norm(c),
                                    torch::nn::ReLU(), reflect(1), Conv2d(Conv2dOptions(c, c, 3)),
                                    instance_norm(c)));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) { return x + body->forward(x); }

GeneratorImpl::GeneratorImpl(int in_channels, int out_channels, int width, int n_res_blocks) {
  if (n_res_blocks < 1) throw ConfigError("generator needs at least one residual block");
  if (width < 1) throw ConfigError("generator width must be positive");
  torch::nn::Sequential s;
  s->push_back(reflect(3));
  s->push_back(Conv2d(Conv2dOptions(in_channels, width, 7)));
  s->push_back(instance_norm(width));
  s->push_back(torch::nn::ReLU());
  int c = width;
  for (int i = 0; i < 2; ++i) {
    s->push_back(Conv2d(Conv2dOptions(c, 2 * c, 3).stride(2).padding(1)));
    s->push_back(instance_norm(2 * c));
    s->push_back(torch::nn::ReLU());
    c *= 2;
  }
  for (int i = 0; i < n_res_blocks; ++i) s->push_back(ResidualBlock(c));
  for (int i = 0; i < 2; ++i) {
    s->push_back(torch::nn::ConvTranspose2d(
        torch::nn::ConvTranspose2dOptions(c, c / 2, 3).stride(2).padding(1).output_padding(1)));
    s->push_back(instance_norm(c / 2));
    s->push_back(torch::nn::ReLU());
    c /= 2;
  }
  s->push_back(reflect(3));
  s->push_back(Conv2d(Conv2dOptions(c, out_channels, 7)));
  s->push_back(torch::nn::Tanh());
  net = register_module("net", s);
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(2) % 4 != 0 || x.size(3) % 4 != 0) {
    throw DimensionError("generator input must be NCHW with spatial dims divisible by 4");
  }
  return net->forward(x);
}

DiscriminatorImpl::DiscriminatorImpl(int in_channels, int width, int n_layers) {
  if (n_layers < 1) throw ConfigError("discriminator needs at least one layer");
  if (width < 1) throw ConfigError("discriminator width must be positive");
  const auto lrelu = [] { return torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)); };
  torch::nn::Sequential s;
  s->push_back(Conv2d(Conv2dOptions(in_channels, width, 4).stride(2).padding(1)));
  s->push_back(lrelu());
  int mult = 1;
  for (int n = 1; n < n_layers; ++n) {
    const int prev = mult;
    mult = std::min(1 << n, 8);
    s->push_back(Conv2d(Conv2dOptions(width * prev, width * mult, 4).stride(2).padding(1)));
    s->push_back(instance_norm(width * mult));
    s->push_back(lrelu());
  }
  const int prev = mult;
  mult = std::min(1 << n_layers, 8);
  s->push_back(Conv2d(Conv2dOptions(width * prev, width * mult, 4).stride(1).padding(1)));
  s->push_back(instance_norm(width * mult));
  s->push_back(lrelu());
  s->push_back(Conv2d(Conv2dOptions(width * mult, 1, 4).stride(1).padding(1)));
  net = register_module("net", s);
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& x) { return net->forward(x); }

int patch_receptive_field(int n_layers) {
  // walk back from one output score: two k4/s1 convs, then n_layers k4/s2 convs
  int r = 1;
  for (int i = 0; i < 2; ++i) r += 3;
  for (int i = 0; i < n_layers; ++i) r = 2 * r + 2;
  return r;
}

void init_weights(torch::nn::Module& module) {
  torch::NoGradGuard guard;
  for (auto& m : module.modules(/*include_self=*/true)) {
    if (auto* conv = m->as<torch::nn::Conv2dImpl>()) {
      conv->weight.normal_(0.0, 0.02);
      if (conv->bias.defined()) conv->bias.zero_();
    } else if (auto* deconv = m->as<torch::nn::ConvTranspose2dImpl>()) {
      deconv->weight.normal_(0.0, 0.02);
      if (deconv->bias.defined()) deconv->bias.zero_();
    }
  }
}

std::int64_t parameter_count(const torch::nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

torch::Tensor to_tensor(const std::vector<Image>& images) {
  if (images.empty()) throw DimensionError("empty batch");
  const Image& first = images.front();
  auto out = torch::empty({static_cast<long>(images.size()), first.channels(), first.height(), first.width()});
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Image& im = images[i];
    if (!im.same_shape(first)) throw DimensionError("batch images differ in shape");
    auto hwc = torch::from_blob(const_cast<float*>(im.data()), {im.height(), im.width(), im.channels()},
                                torch::kFloat32);
    out[static_cast<long>(i)].copy_(hwc.permute({2, 0, 1}));
  }
  return out.mul_(2.0).sub_(1.0);
}

torch::Tensor to_tensor(const Image& image) { return to_tensor(std::vector<Image>{image}); }

Image to_image(const torch::Tensor& batch, int index) {
  torch::Tensor chw = batch[index].detach().to(torch::kFloat32).add(1.0).mul(0.5).clamp(0.0, 1.0);
  const auto c = static_cast<int>(chw.size(0));
  const auto h = static_cast<int>(chw.size(1));
  const auto w = static_cast<int>(chw.size(2));
  torch::Tensor hwc = chw.permute({1, 2, 0}).contiguous();
  Image out(w, h, c);
  std::copy_n(hwc.data_ptr<float>(), out.size(), out.data());
  return out;
}

torch::Tensor cycle_loss(const torch::Tensor& rec_x, const torch::Tensor& x, const torch::Tensor& rec_y,
                         const torch::Tensor& y) {
  if (!rec_x.sizes().equals(x.sizes()) || !rec_y.sizes().equals(y.sizes())) {
    throw DimensionError("round trip changed the tensor shape");
  }
  return (rec_x - x).abs().mean() + (rec_y - y).abs().mean();
}

torch::Tensor cycle_loss(const Net& g_x, const Net& g_y, const torch::Tensor& x, const torch::Tensor& y) {
  return cycle_loss(g_y(g_x(x)), x, g_x(g_y(y)), y);
}

torch::Tensor lsgan_generator_loss(const torch::Tensor& d_fake) { return (d_fake - 1.0).pow(2).mean(); }

torch::Tensor lsgan_discriminator_loss(const torch::Tensor& d_real, const torch::Tensor& d_fake) {
  return 0.5 * (d_real - 1.0).pow(2).mean() + 0.5 * d_fake.pow(2).mean();
}

torch::Tensor identity_loss(const Net& g_x, const Net& g_y, const torch::Tensor& x, const torch::Tensor& y) {
  const torch::Tensor ix = g_y(x);
  const torch::Tensor iy = g_x(y);
  if (!ix.sizes().equals(x.sizes()) || !iy.sizes().equals(y.sizes())) {
    throw DimensionError("identity mapping changed the tensor shape");
  }
  return (ix - x).abs().mean() + (iy - y).abs().mean();
}

GeneratorTerms generator_objective(Generator& g_x, Generator& g_y, Discriminator& d_x, Discriminator& d_y,
                                   const torch::Tensor& x, const torch::Tensor& y, double lambda_cycle,
                                   double lambda_identity) {
  GeneratorTerms t;
  t.fake_y = g_x->forward(x);
  t.fake_x = g_y->forward(y);
  t.cycle = cycle_loss(g_y->forward(t.fake_y), x, g_x->forward(t.fake_x), y);
  t.gen_x = lsgan_generator_loss(d_y->forward(t.fake_y));
  t.gen_y = lsgan_generator_loss(d_x->forward(t.fake_x));
  if (lambda_identity > 0.0) {
    t.identity = identity_loss([&](const torch::Tensor& v) { return g_x->forward(v); },
                               [&](const torch::Tensor& v) { return g_y->forward(v); }, x, y);
  } else {
    t.identity = torch::zeros({}, x.options());
  }
  t.total = lambda_cycle * t.cycle + t.gen_x + t.gen_y + lambda_identity * t.identity;
  return t;
}

}  // namespace vhist::nn
