#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <memory>

#include "fpforge/nn.hpp"

using namespace fpforge;
using namespace fpforge::nn;

namespace {

using TensorD = TensorT<double>;

TensorD random_tensor(std::vector<int> shape, RandomStream& rng, double scale = 1.0) {
  TensorD t(std::move(shape));
  for (auto& v : t.data) v = rng.normal(0.0, scale);
  return t;
}

// Central-difference check of d(loss)/d(param) and d(loss)/d(input) for an
// arbitrary module under a smooth scalarizer. Runs in double so the 1e-3
// relative tolerance is meaningful.
struct GradCheck {
  ModuleT<double>* module;
  TensorD input;
  bool training = true;

  // Scalarizer: fixed random projection of the output, so every output
  // element participates in the loss.
  TensorD proj;

  double loss_for(const TensorD& x) {
    TensorD y = module->forward(x, training);
    double s = 0;
    for (size_t i = 0; i < y.data.size(); ++i) s += y.data[i] * proj.data[i];
    return s;
  }

  void run(double tol = 1e-3, int max_param_probes = 24) {
    RandomStream prng(99);
    TensorD y = module->forward(input, training);
    proj = random_tensor(y.shape, prng);

    // Analytic gradients.
    module->zero_grad();
    module->forward(input, training);
    TensorD gx = module->backward(proj);

    std::vector<ParamT<double>*> params;
    module->collect_params(params);

    auto check_one = [&](double* slot, double analytic, const char* what) {
      const double h = 1e-5 * std::max(1.0, std::abs(*slot));
      double orig = *slot;
      *slot = orig + h;
      double lp = loss_for(input);
      *slot = orig - h;
      double lm = loss_for(input);
      *slot = orig;
      double fd = (lp - lm) / (2 * h);
      double denom = std::max(std::abs(fd), std::abs(analytic));
      if (denom < 1e-9) return;  // both numerically zero (dead unit)
      CAPTURE(what);
      CAPTURE(fd);
      CAPTURE(analytic);
      CHECK(std::abs(fd - analytic) / denom <= tol);
    };

    RandomStream pick(7);
    for (auto* p : params) {
      int probes = std::min<int>(max_param_probes, static_cast<int>(p->value.numel()));
      for (int i = 0; i < probes; ++i) {
        size_t idx = static_cast<size_t>(pick.uniform_index(p->value.data.size()));
        check_one(&p->value.data[idx], p->grad.data[idx], p->name.c_str());
      }
    }
    for (int i = 0; i < 24; ++i) {
      size_t idx = static_cast<size_t>(pick.uniform_index(input.data.size()));
      check_one(&input.data[idx], gx.data[idx], "input");
    }
  }
};

}  // namespace

TEST_CASE("gradcheck: linear") {
  RandomStream rng(1);
  LinearT<double> lin("lin", 13, 7, rng);
  GradCheck gc{&lin, random_tensor({4, 13}, rng)};
  gc.run();
}

TEST_CASE("gradcheck: conv2d stride 1 with padding") {
  RandomStream rng(2);
  Conv2dT<double> conv("c", 3, 5, 3, 1, 1, rng);
  GradCheck gc{&conv, random_tensor({2, 3, 6, 6}, rng)};
  gc.run();
}

TEST_CASE("gradcheck: conv2d stride 2") {
  RandomStream rng(3);
  Conv2dT<double> conv("c", 4, 6, 3, 2, 1, rng);
  GradCheck gc{&conv, random_tensor({2, 4, 8, 8}, rng)};
  gc.run();
}

TEST_CASE("gradcheck: batchnorm2d (train mode)") {
  RandomStream rng(4);
  BatchNorm2dT<double> bn("bn", 4);
  GradCheck gc{&bn, random_tensor({3, 4, 5, 5}, rng)};
  gc.run();
}

TEST_CASE("gradcheck: upsample + activations") {
  RandomStream rng(5);
  auto seq = std::make_unique<SequentialT<double>>();
  seq->add(std::make_unique<Upsample2xT<double>>());
  seq->add(std::make_unique<LeakyReLUT<double>>(0.2));
  seq->add(std::make_unique<TanhT<double>>());
  GradCheck gc{seq.get(), random_tensor({2, 3, 4, 4}, rng)};
  gc.run();
}

TEST_CASE("gradcheck: small conv net end to end") {
  RandomStream rng(6);
  auto net = std::make_unique<SequentialT<double>>();
  net->add(std::make_unique<Conv2dT<double>>("c1", 2, 4, 3, 2, 1, rng));
  net->add(std::make_unique<BatchNorm2dT<double>>("bn1", 4));
  net->add(std::make_unique<ReLUT<double>>());
  net->add(std::make_unique<Conv2dT<double>>("c2", 4, 6, 3, 2, 1, rng));
  net->add(std::make_unique<LeakyReLUT<double>>(0.2));
  net->add(std::make_unique<FlattenT<double>>());
  net->add(std::make_unique<LinearT<double>>("fc", 6 * 2 * 2, 5, rng));
  net->add(std::make_unique<SigmoidT<double>>());
  GradCheck gc{net.get(), random_tensor({3, 2, 8, 8}, rng)};
  gc.run();
}

TEST_CASE("bce loss values and gradient") {
  // probs == target (clipped) -> ~0
  TensorD t({1, 4});
  t.data = {1, 0, 1, 0};
  TensorD p = t;
  CHECK(bce_loss<double>(p, t, nullptr) == doctest::Approx(0.0).epsilon(1e-6));

  // all probs 0.5 -> ln 2
  p.fill(0.5);
  CHECK(bce_loss<double>(p, t, nullptr) == doctest::Approx(std::log(2.0)));

  // probs = 1 - target, clipped at 1e-7 -> -ln(1e-7) ~ 16.1
  for (size_t i = 0; i < 4; ++i) p.data[i] = 1.0 - t.data[i];
  CHECK(bce_loss<double>(p, t, nullptr) == doctest::Approx(-std::log(1e-7)).epsilon(1e-6));

  // Finite-difference check of the gradient at a generic point.
  RandomStream rng(12);
  TensorD probs({2, 9});
  TensorD targ({2, 9});
  for (auto& v : probs.data) v = 0.05 + 0.9 * rng.uniform();
  for (auto& v : targ.data) v = rng.bit();
  TensorD grad;
  bce_loss<double>(probs, targ, &grad);
  for (int i = 0; i < 6; ++i) {
    size_t idx = static_cast<size_t>(rng.uniform_index(probs.data.size()));
    double h = 1e-6;
    double orig = probs.data[idx];
    probs.data[idx] = orig + h;
    double lp = bce_loss<double>(probs, targ, nullptr);
    probs.data[idx] = orig - h;
    double lm = bce_loss<double>(probs, targ, nullptr);
    probs.data[idx] = orig;
    double fd = (lp - lm) / (2 * h);
    CHECK(std::abs(fd - grad.data[idx]) / std::max(1e-8, std::abs(fd)) <= 1e-3);
  }

  TensorD wrong({1, 3});
  CHECK_THROWS_AS(bce_loss<double>(probs, wrong, nullptr), std::invalid_argument);
}

TEST_CASE("mse loss values and gradient") {
  TensorD a({1, 2, 2, 2});
  TensorD b({1, 2, 2, 2});
  CHECK(mse_loss<double>(a, b, nullptr) == doctest::Approx(0.0));
  a.fill(1.0);
  CHECK(mse_loss<double>(a, b, nullptr) == doctest::Approx(1.0));  // zeros vs ones
  b.fill(0.9);
  CHECK(mse_loss<double>(a, b, nullptr) == doctest::Approx(0.01));  // uniform offset 0.1

  RandomStream rng(13);
  TensorD x = random_tensor({2, 3, 4, 4}, rng);
  TensorD y = random_tensor({2, 3, 4, 4}, rng);
  TensorD grad;
  mse_loss<double>(x, y, &grad);
  for (int i = 0; i < 6; ++i) {
    size_t idx = static_cast<size_t>(rng.uniform_index(x.data.size()));
    double h = 1e-6;
    double orig = x.data[idx];
    x.data[idx] = orig + h;
    double lp = mse_loss<double>(x, y, nullptr);
    x.data[idx] = orig - h;
    double lm = mse_loss<double>(x, y, nullptr);
    x.data[idx] = orig;
    double fd = (lp - lm) / (2 * h);
    CHECK(std::abs(fd - grad.data[idx]) / std::max(1e-8, std::abs(fd)) <= 1e-3);
  }
}

TEST_CASE("gan losses: values and gradients") {
  RandomStream rng(14);
  TensorD r = random_tensor({6, 1}, rng);
  TensorD f = random_tensor({6, 1}, rng);
  TensorD gr, gf;
  double dl = gan_d_loss<double>(r, f, &gr, &gf);
  CHECK(dl > 0);
  // d/dreal softplus(-x) = sigmoid(x) - 1, spot check by finite differences.
  for (int i = 0; i < 4; ++i) {
    size_t idx = static_cast<size_t>(rng.uniform_index(r.data.size()));
    double h = 1e-6, orig = r.data[idx];
    r.data[idx] = orig + h;
    double lp = gan_d_loss<double>(r, f, nullptr, nullptr);
    r.data[idx] = orig - h;
    double lm = gan_d_loss<double>(r, f, nullptr, nullptr);
    r.data[idx] = orig;
    CHECK(std::abs((lp - lm) / (2 * h) - gr.data[idx]) <= 1e-6);
  }
  TensorD gg;
  gan_g_loss<double>(f, &gg);
  for (int i = 0; i < 4; ++i) {
    size_t idx = static_cast<size_t>(rng.uniform_index(f.data.size()));
    double h = 1e-6, orig = f.data[idx];
    f.data[idx] = orig + h;
    double lp = gan_g_loss<double>(f, nullptr);
    f.data[idx] = orig - h;
    double lm = gan_g_loss<double>(f, nullptr);
    f.data[idx] = orig;
    CHECK(std::abs((lp - lm) / (2 * h) - gg.data[idx]) <= 1e-6);
  }
}

TEST_CASE("adam reduces a quadratic") {
  ParamT<double> p("p", {8});
  RandomStream rng(15);
  for (auto& v : p.value.data) v = rng.normal(0, 2);
  AdamT<double> opt(0.05);
  opt.attach({&p});
  auto loss = [&]() {
    double s = 0;
    for (auto v : p.value.data) s += v * v;
    return s;
  };
  double initial = loss();
  for (int it = 0; it < 400; ++it) {
    for (size_t i = 0; i < p.value.data.size(); ++i) p.grad.data[i] = 2 * p.value.data[i];
    opt.step();
    p.grad.fill(0);
  }
  CHECK(loss() < 1e-2 * initial);
}

TEST_CASE("seeded init is reproducible") {
  RandomStream rng1(42), rng2(42);
  Conv2dT<double> a("c", 3, 8, 3, 1, 1, rng1);
  Conv2dT<double> b("c", 3, 8, 3, 1, 1, rng2);
  CHECK(a.weight.value.data == b.weight.value.data);
}

TEST_CASE("parameter serialization round trip") {
  RandomStream rng(16);
  SequentialT<double> net;
  net.add(std::make_unique<Conv2dT<double>>("c1", 2, 3, 3, 1, 1, rng));
  net.add(std::make_unique<BatchNorm2dT<double>>("bn", 3));
  net.add(std::make_unique<LinearT<double>>("fc", 3, 2, rng));
  std::vector<ParamT<double>*> ps;
  net.collect_params(ps);
  auto blob = serialize_params(ps);

  RandomStream rng2(999);
  SequentialT<double> net2;
  net2.add(std::make_unique<Conv2dT<double>>("c1", 2, 3, 3, 1, 1, rng2));
  net2.add(std::make_unique<BatchNorm2dT<double>>("bn", 3));
  net2.add(std::make_unique<LinearT<double>>("fc", 3, 2, rng2));
  std::vector<ParamT<double>*> ps2;
  net2.collect_params(ps2);
  deserialize_params(blob, ps2);
  for (size_t i = 0; i < ps.size(); ++i) CHECK(ps[i]->value.data == ps2[i]->value.data);

  // Corrupting the blob is detected.
  auto bad = blob;
  bad.resize(bad.size() / 2);
  CHECK_THROWS_AS(deserialize_params(bad, ps2), CorruptCheckpoint);
}

TEST_CASE("concat/split channels round trip") {
  RandomStream rng(17);
  TensorD a = random_tensor({2, 3, 4, 4}, rng);
  TensorD b = random_tensor({2, 5, 4, 4}, rng);
  TensorD c = concat_channels(a, b);
  CHECK(c.shape == std::vector<int>{2, 8, 4, 4});
  TensorD ga, gb;
  split_channels(c, 3, ga, gb);
  CHECK(ga.data == a.data);
  CHECK(gb.data == b.data);
}
