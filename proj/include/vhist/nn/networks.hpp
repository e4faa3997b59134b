#pragma once

// libtorch-facing internals. Only the nn sources and the gradient/architecture tests
// include this header; everything else goes through translate.hpp.

#include <torch/torch.h>

#include <functional>
#include <vector>

#include "vhist/cyclegan_config.hpp"
#include "vhist/image.hpp"

namespace vhist::nn {

/// Residual block: pad-conv3-IN-ReLU-pad-conv3-IN plus the skip connection.
struct ResidualBlockImpl : torch::nn::Module {
  explicit ResidualBlockImpl(int channels);
  torch::Tensor forward(const torch::Tensor& x);
  torch::nn::Sequential body{nullptr};
};
TORCH_MODULE(ResidualBlock);

/// ResNet generator: 7×7 stem, two stride-2 downsampling convs, residual blocks,
/// two transposed-conv upsamplings, 7×7 head, tanh. Spatial dims must be multiples of 4.
struct GeneratorImpl : torch::nn::Module {
  GeneratorImpl(int in_channels, int out_channels, int width, int n_res_blocks);
  torch::Tensor forward(const torch::Tensor& x);
  torch::nn::Sequential net{nullptr};
};
TORCH_MODULE(Generator);

/// PatchGAN: a k4/s2 conv, n_layers − 1 further k4/s2 convs with IN, a k4/s1 conv with IN,
/// and a k4/s1 conv to one channel. Three layers give a 70×70 receptive field.
struct DiscriminatorImpl : torch::nn::Module {
  DiscriminatorImpl(int in_channels, int width, int n_layers);
  torch::Tensor forward(const torch::Tensor& x);
  torch::nn::Sequential net{nullptr};
};
TORCH_MODULE(Discriminator);

/// Receptive field (px) of one output score of DiscriminatorImpl with n_layers.
int patch_receptive_field(int n_layers);

/// Weights ~ N(0, 0.02), biases 0.
void init_weights(torch::nn::Module& module);

std::int64_t parameter_count(const torch::nn::Module& module);

/// HWC [0,1] images → NCHW in [−1,1].
torch::Tensor to_tensor(const std::vector<Image>& images);
torch::Tensor to_tensor(const Image& image);
/// One NCHW sample in [−1,1] → HWC [0,1] image (clamped).
Image to_image(const torch::Tensor& batch, int index = 0);

using Net = std::function<torch::Tensor(const torch::Tensor&)>;

// Loss terms. All are means over every element.

/// |rec_x − x| + |rec_y − y|.
torch::Tensor cycle_loss(const torch::Tensor& rec_x, const torch::Tensor& x, const torch::Tensor& rec_y,
                         const torch::Tensor& y);
/// mean|G_Y(G_X(x)) − x| + mean|G_X(G_Y(y)) − y|.
torch::Tensor cycle_loss(const Net& g_x, const Net& g_y, const torch::Tensor& x, const torch::Tensor& y);

/// E[(D(G(x)) − 1)²].
torch::Tensor lsgan_generator_loss(const torch::Tensor& d_fake);
/// ½E[(D(y) − 1)²] + ½E[D(G(x))²].
torch::Tensor lsgan_discriminator_loss(const torch::Tensor& d_real, const torch::Tensor& d_fake);

/// mean|G_Y(x) − x| + mean|G_X(y) − y|.
torch::Tensor identity_loss(const Net& g_x, const Net& g_y, const torch::Tensor& x, const torch::Tensor& y);

/// Every generator-side term for one batch, with graph attached.
struct GeneratorTerms {
  torch::Tensor cycle, gen_x, gen_y, identity, total;
  torch::Tensor fake_x, fake_y;  // G_Y(y), G_X(x)
};

/// λ_cyc·L_cycle + L_G(D_Y, G_X) + L_G(D_X, G_Y) + λ_idt·L_idt.
GeneratorTerms generator_objective(Generator& g_x, Generator& g_y, Discriminator& d_x, Discriminator& d_y,
                                   const torch::Tensor& x, const torch::Tensor& y, double lambda_cycle,
                                   double lambda_identity);

}  // namespace vhist::nn
