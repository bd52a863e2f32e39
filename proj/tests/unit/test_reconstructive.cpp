#include "prelude.hpp"

#include <cmath>

#include "oracles.hpp"
#include "pouta/errors.hpp"
#include "pouta/reconstructive.hpp"

using namespace pouta;

namespace {

// Scalar SSIM on one channel with a zero-padded Gaussian window.
double ssim_scalar(const torch::Tensor& a2d, const torch::Tensor& b2d) {
  const auto a = a2d.to(torch::kDouble).contiguous();
  const auto b = b2d.to(torch::kDouble).contiguous();
  auto A = a.accessor<double, 2>();
  auto B = b.accessor<double, 2>();
  const int h = static_cast<int>(a.size(0));
  const int w = static_cast<int>(a.size(1));
  double g[11];
  double gsum = 0.0;
  for (int i = 0; i < 11; ++i) {
    g[i] = std::exp(-((i - 5) * (i - 5)) / (2.0 * 1.5 * 1.5));
    gsum += g[i];
  }
  for (double& v : g) v /= gsum;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int dy = -5; dy <= 5; ++dy) {
        for (int dx = -5; dx <= 5; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || xx < 0 || yy >= h || xx >= w) continue;
          const double k = g[dy + 5] * g[dx + 5];
          ma += k * A[yy][xx];
          mb += k * B[yy][xx];
          saa += k * A[yy][xx] * A[yy][xx];
          sbb += k * B[yy][xx] * B[yy][xx];
          sab += k * A[yy][xx] * B[yy][xx];
        }
      }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
  }
  return total / (h * w);
}

ReconstructiveNet mini_net(std::int64_t size = 16) {
  ReconstructiveOptions opt;
  opt.widths = widths_from_base(4);
  opt.image_size = size;
  return ReconstructiveNet(opt);
}

}  // namespace

TEST_SUITE("reconstructive") {

TEST_CASE("encoder and decoder pyramid shapes at 224") {
  torch::manual_seed(0);
  ReconstructiveNet net;
  net->eval();
  torch::NoGradGuard no_grad;
  const auto out = net->forward(torch::rand({2, 3, 224, 224}));
  const std::int64_t sides[4] = {112, 56, 28, 14};
  const std::int64_t widths[4] = {64, 128, 256, 512};
  for (int i = 0; i < 4; ++i) {
    CHECK(out.encoder[i].sizes() == torch::IntArrayRef({2, widths[i], sides[i], sides[i]}));
    CHECK(out.decoder[i].sizes() == out.encoder[i].sizes());
  }
  CHECK(out.latent.sizes() == torch::IntArrayRef({2, 512, 14, 14}));
  CHECK(out.image.sizes() == torch::IntArrayRef({2, 3, 224, 224}));
  CHECK(out.image.min().item<float>() >= 0.0f);
  CHECK(out.image.max().item<float>() <= 1.0f);
}

TEST_CASE("encode rejects inputs that were not resized") {
  ReconstructiveNet net;
  CHECK_THROWS_AS(net->encode(torch::rand({1, 3, 200, 224})), ArgumentError);
  CHECK_THROWS_AS(net->encode(torch::rand({1, 3, 256, 256})), ArgumentError);
  CHECK_THROWS_AS(net->encode(torch::rand({3, 224, 224})), ArgumentError);
  CHECK_THROWS_AS(ReconstructiveNet(ReconstructiveOptions{3, widths_from_base(4), 20}), ArgumentError);
}

TEST_CASE("eval mode is deterministic") {
  torch::manual_seed(1);
  auto net = mini_net(64);
  net->eval();
  torch::NoGradGuard no_grad;
  const auto x = torch::rand({2, 3, 64, 64});
  const auto a = net->encode(x);
  const auto b = net->encode(x);
  for (int i = 0; i < 4; ++i) CHECK(torch::equal(a[i], b[i]));
}

TEST_CASE("encoder output depends on the input") {
  torch::manual_seed(2);
  auto net = mini_net(64);
  auto x = torch::rand({1, 3, 64, 64}).requires_grad_(true);
  net->encode(x)[3].sum().backward();
  CHECK(x.grad().abs().sum().item<double>() > 0.0);
}

TEST_CASE("mapping layer keeps shape and is not the identity") {
  torch::manual_seed(3);
  ReconstructiveNet net;
  net->eval();
  torch::NoGradGuard no_grad;
  const auto f = torch::rand({3, 512, 14, 14});
  const auto m = net->map_latent(f);
  CHECK(m.sizes() == f.sizes());
  CHECK((m - f).abs().max().item<double>() > 1e-3);
  CHECK_THROWS_AS(net->map_latent(torch::rand({1, 256, 14, 14})), ArgumentError);
}

TEST_CASE("decode mirrors the encoder") {
  torch::manual_seed(4);
  auto net = mini_net(32);
  net->eval();
  torch::NoGradGuard no_grad;
  const auto x = torch::rand({2, 3, 32, 32});
  const auto enc = net->encode(x);
  const auto [dec, image] = net->decode(net->map_latent(enc[3]));
  for (int i = 0; i < 4; ++i) CHECK(dec[i].sizes() == enc[i].sizes());
  CHECK(image.sizes() == x.sizes());
}

TEST_CASE("reconstruction loss on identical images is zero") {
  const auto x = torch::rand({2, 3, 32, 32});
  CHECK(std::abs(reconstruction_loss(x, x).item<double>()) < 1e-6);
  CHECK(std::abs(1.0 - ssim(x, x).item<double>()) < 1e-6);
}

TEST_CASE("mse component on a 2x2 pair") {
  const auto a = torch::tensor({0.0, 1.0, 1.0, 0.0}, torch::kDouble).view({1, 1, 2, 2});
  const auto b = torch::zeros({1, 1, 2, 2}, torch::kDouble);
  // (0 + 1 + 1 + 0) / 4
  const double mse = reconstruction_loss(a, b).item<double>() - (1.0 - ssim(a, b).item<double>());
  CHECK(mse == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("ssim matches a scalar loop") {
  torch::manual_seed(5);
  for (int trial = 0; trial < 5; ++trial) {
    const auto a = torch::rand({1, 1, 17, 13}, torch::kDouble);
    const auto b = (a + 0.2 * torch::rand({1, 1, 17, 13}, torch::kDouble)).clamp(0, 1);
    CHECK(ssim(a, b).item<double>() == doctest::Approx(ssim_scalar(a[0][0], b[0][0])).epsilon(1e-10));
  }
}

TEST_CASE("reconstruction loss is non-negative and checks shapes") {
  torch::manual_seed(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = torch::rand({1, 3, 16, 16});
    const auto b = torch::rand({1, 3, 16, 16});
    CHECK(reconstruction_loss(a, b).item<double>() >= 0.0);
  }
  CHECK_THROWS_AS(reconstruction_loss(torch::rand({1, 3, 16, 16}), torch::rand({1, 3, 16, 8})), ArgumentError);
}

TEST_CASE("gradient check on a miniature network") {
  // 32 x 32 keeps the stride-16 level at 2 x 2; with a 1 x 1 map, batch norm
  // over two values is close to a sign function and central differences break down.
  torch::manual_seed(7);
  auto net = mini_net(32);
  net->to(torch::kDouble);
  const auto x = torch::rand({2, 3, 32, 32}, torch::kDouble);
  const auto target = torch::rand({2, 3, 32, 32}, torch::kDouble);
  auto params = net->parameters();
  const auto result =
      oracle::gradcheck([&] { return reconstruction_loss(net->forward(x).image, target); }, params, 12, 11);
  CHECK_FALSE(result.all_analytic_zero);
  CHECK(result.max_relative_error < 1e-4);
}

}
