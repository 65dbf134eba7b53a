#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "hazeprior/checkpoint.hpp"
#include "hazeprior/error.hpp"
#include "hazeprior/losses.hpp"
#include "hazeprior/optim.hpp"
#include "hazeprior/prior_trainer.hpp"
#include "hazeprior/restorer.hpp"
#include "hazeprior/scenes.hpp"
#include "support.hpp"

using namespace hazeprior;
using testsupport::TempDir;

namespace {

// Direct evaluation of the affine neighborhood filter with edge replication.
double filter_oracle(const LinearPatchRestorer& m, const Image& in, int y, int x, int c)
{
    const int r = m.radius();
    const auto p = m.parameters();
    const std::size_t base = static_cast<std::size_t>(c) * m.params_per_channel();
    double s = p[base + static_cast<std::size_t>(m.taps())];
    int k = 0;
    for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx, ++k) {
            const int yy = std::clamp(y + dy, 0, in.height() - 1);
            const int xx = std::clamp(x + dx, 0, in.width() - 1);
            s += p[base + static_cast<std::size_t>(k)] * in.at(yy, xx, c);
        }
    }
    return s;
}

LinearPatchRestorer random_restorer(RngStream& rng, int radius, int channels)
{
    LinearPatchRestorer m(radius, channels);
    std::vector<double> p(m.parameters().size());
    for (double& v : p) v = rng.uniform(-0.3, 0.3);
    m.set_parameters(p);
    return m;
}

double max_rel_error_fd(const LinearPatchRestorer& model, const Image& input, const Image& target, LossKind kind)
{
    const auto analytic = loss_gradient(model, input, target, kind);
    std::vector<double> p(model.parameters().begin(), model.parameters().end());
    LinearPatchRestorer probe = model;
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double keep = p[i];
        p[i] = keep + h;
        probe.set_parameters(p);
        const double up = reconstruction_loss(probe.forward_raw(input), target, kind);
        p[i] = keep - h;
        probe.set_parameters(p);
        const double down = reconstruction_loss(probe.forward_raw(input), target, kind);
        p[i] = keep;
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

}  // namespace

TEST_SUITE("prior-trainer") {

TEST_CASE("identity and zero restorers")
{
    RngStream rng(1);
    const Image img = testsupport::random_image(rng, 9, 11, 3);
    for (int r : {0, 1, 2, 3}) {
        CHECK(LinearPatchRestorer::identity(r, 3).forward(img) == img);
    }
    const LinearPatchRestorer zero(2, 3);
    CHECK(zero.forward(img) == Image(9, 11, 3, 0.0));
    CHECK(zero.parameters().size() == 3 * 26);
    CHECK(zero.architecture() == "linear_patch r=2 c=3");
}

TEST_CASE("forward matches a direct neighborhood sum")
{
    RngStream rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        const LinearPatchRestorer m = random_restorer(rng, 1 + trial % 3, trial % 2 == 0 ? 3 : 1);
        const Image in = testsupport::random_image(rng, 7, 5, m.channels());
        const Field out = m.forward_raw(in);
        for (int y = 0; y < 7; ++y) {
            for (int x = 0; x < 5; ++x) {
                for (int c = 0; c < m.channels(); ++c) {
                    CHECK(out.at(y, x, c) == doctest::Approx(filter_oracle(m, in, y, x, c)).epsilon(1e-13));
                }
            }
        }
        const Image clamped = m.forward(in);
        for (std::size_t k = 0; k < out.data().size(); ++k) {
            CHECK(clamped.data()[k] == std::clamp(out.data()[k], 0.0, 1.0));
        }
    }
}

TEST_CASE("restorer argument errors")
{
    CHECK_THROWS_AS(LinearPatchRestorer(-1, 3), std::invalid_argument);
    CHECK_THROWS_AS(LinearPatchRestorer(1, 2), std::invalid_argument);
    LinearPatchRestorer m(1, 3);
    CHECK_THROWS_AS(m.set_parameters(std::vector<double>(5)), std::invalid_argument);
    CHECK_THROWS_AS(m.forward(Image(4, 4, 1)), std::invalid_argument);
    CHECK_THROWS_AS(make_restorer("transformer"), DataError);
    CHECK(make_restorer("linear_patch r=3 c=1")->parameters().size() == 50);
}

TEST_CASE("losses")
{
    const Image target({1, 2, 1}, {0.0, 1.0});
    const Image pred({1, 2, 1}, {0.5, 0.5});
    CHECK(reconstruction_loss(pred, target, LossKind::MSE) == doctest::Approx(0.25));
    CHECK(reconstruction_loss(pred, target, LossKind::L1) == doctest::Approx(0.5));
    CHECK(reconstruction_loss(target, target, LossKind::MSE) == 0.0);
    CHECK_THROWS_AS(reconstruction_loss(Image(1, 3, 1), target, LossKind::MSE), std::invalid_argument);

    CHECK(parse_loss_kind("mse") == LossKind::MSE);
    CHECK(parse_loss_kind("l1") == LossKind::L1);
    CHECK(to_string(LossKind::L1) == "l1");
    CHECK_THROWS_AS(parse_loss_kind("huber"), std::invalid_argument);

    const Field g = reconstruction_loss_grad(pred.to_field(), target, LossKind::MSE);
    CHECK(g.data()[0] == doctest::Approx(0.5));
    CHECK(g.data()[1] == doctest::Approx(-0.5));
    const Field gl = reconstruction_loss_grad(Field({1, 3, 1}, {0.2, 0.5, 0.9}), Image({1, 3, 1}, {0.5, 0.5, 0.5}),
                                              LossKind::L1);
    CHECK(gl.data()[0] == doctest::Approx(-1.0 / 3));
    CHECK(gl.data()[1] == 0.0);
    CHECK(gl.data()[2] == doctest::Approx(1.0 / 3));
}

TEST_CASE("psnr agrees with an independent computation")
{
    RngStream rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Image a = testsupport::random_image(rng, 8, 8, 3);
        const Image b = testsupport::random_image(rng, 8, 8, 3);
        CHECK(psnr(a, b) == doctest::Approx(testsupport::psnr_oracle(a, b)).epsilon(1e-12));
    }
    CHECK(psnr(Image(2, 2, 1, 0.0), Image(2, 2, 1, 0.1)) == doctest::Approx(20.0));
    CHECK(std::isinf(psnr(Image(2, 2, 1, 0.3), Image(2, 2, 1, 0.3))));
}

TEST_CASE("analytic gradient matches central differences")
{
    RngStream rng(4);
    for (int trial = 0; trial < 40; ++trial) {
        const int channels = trial % 2 == 0 ? 3 : 1;
        const LinearPatchRestorer m = random_restorer(rng, 1 + trial % 2, channels);
        const Image in = testsupport::random_image(rng, 6, 6, channels);
        const Image target = testsupport::random_image(rng, 6, 6, channels);
        CHECK(max_rel_error_fd(m, in, target, LossKind::MSE) < 1e-4);
    }
}

TEST_CASE("L1 gradient matches central differences away from ties")
{
    RngStream rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const LinearPatchRestorer m = random_restorer(rng, 1, 3);
        const Image in = testsupport::random_image(rng, 5, 5, 3);
        const Image target = testsupport::random_image(rng, 5, 5, 3);
        const Field pred = m.forward_raw(in);
        bool near_tie = false;
        for (std::size_t k = 0; k < pred.data().size(); ++k) {
            near_tie |= std::abs(pred.data()[k] - target.data()[k]) < 1e-3;
        }
        if (near_tie) continue;
        CHECK(max_rel_error_fd(m, in, target, LossKind::L1) < 1e-4);
    }
}

TEST_CASE("adam matches a hand-written reference")
{
    RngStream rng(6);
    const AdamConfig cfg;
    std::vector<double> p(7), ref(7), m(7, 0.0), v(7, 0.0);
    for (std::size_t i = 0; i < 7; ++i) p[i] = ref[i] = rng.uniform(-1, 1);
    OptimState state(7);
    const double lr = 0.01;
    for (int t = 1; t <= 25; ++t) {
        std::vector<double> g(7);
        for (double& x : g) x = rng.uniform(-2, 2);
        adam_step(p, g, state, lr, cfg);
        for (std::size_t i = 0; i < 7; ++i) {
            m[i] = 0.9 * m[i] + 0.1 * g[i];
            v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
            const double mh = m[i] / (1.0 - std::pow(0.9, t));
            const double vh = v[i] / (1.0 - std::pow(0.999, t));
            ref[i] -= lr * mh / (std::sqrt(vh) + 1e-8);
            CHECK(p[i] == doctest::Approx(ref[i]).epsilon(1e-12));
        }
    }
    CHECK(state.step == 25);
}

TEST_CASE("adam first step has magnitude lr and repeated equal gradients do not grow it")
{
    std::vector<double> p{0.0, 0.0};
    OptimState state(2);
    adam_step(p, std::vector<double>{0.5, -3.0}, state, 0.1);
    CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(0.1).epsilon(1e-6));
    const double first = std::abs(p[0]);
    const double before = p[0];
    adam_step(p, std::vector<double>{0.5, -3.0}, state, 0.1);
    CHECK(std::abs(p[0] - before) <= first * (1.0 + 1e-12));
}

TEST_CASE("adam rejects non-finite gradients without touching state")
{
    std::vector<double> p{1.0, 2.0};
    OptimState state(2);
    adam_step(p, std::vector<double>{0.1, 0.1}, state, 0.01);
    const auto p_before = p;
    const OptimState s_before = state;
    CHECK_THROWS_AS(adam_step(p, std::vector<double>{std::nan(""), 0.1}, state, 0.01), NumericError);
    CHECK_THROWS_AS(adam_step(p, std::vector<double>{0.0, std::numeric_limits<double>::infinity()}, state, 0.01),
                    NumericError);
    CHECK(p == p_before);
    CHECK(state == s_before);
    CHECK_THROWS_AS(adam_step(p, std::vector<double>{0.1}, state, 0.01), std::invalid_argument);
}

TEST_CASE("checkpoint round trip and corruption")
{
    TempDir dir("ckpt");
    RngStream rng(7);
    const LinearPatchRestorer m = random_restorer(rng, 2, 3);
    save_checkpoint(m, dir / "m.ckpt");
    CHECK_FALSE(std::filesystem::exists(dir / "m.ckpt.tmp"));

    const auto loaded = load_model(dir / "m.ckpt");
    CHECK(loaded->architecture() == m.architecture());
    const auto lp = loaded->parameters();
    const auto mp = m.parameters();
    CHECK(std::equal(lp.begin(), lp.end(), mp.begin(), mp.end()));

    auto bytes = testsupport::read_bytes(dir / "m.ckpt");
    CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "HZPRCKPT");
    CHECK(bytes.size() == 8 + 4 + 4 + m.architecture().size() + 8 + 8 * mp.size());
    CHECK(encode_checkpoint({m.architecture(), mp.size() ? std::vector<double>(mp.begin(), mp.end())
                                                          : std::vector<double>{}}) == bytes);

    auto truncated = bytes;
    truncated.pop_back();
    CHECK_THROWS_AS(decode_checkpoint(truncated), DataError);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(bad_magic), DataError);
    auto bad_version = bytes;
    bad_version[8] = 9;
    CHECK_THROWS_AS(decode_checkpoint(bad_version), DataError);

    Checkpoint mismatch{"linear_patch r=1 c=3", {1.0, 2.0}};
    const auto mb = encode_checkpoint(mismatch);
    std::ofstream(dir / "bad.ckpt", std::ios::binary).write(reinterpret_cast<const char*>(mb.data()),
                                                          static_cast<std::streamsize>(mb.size()));
    CHECK_THROWS_AS(load_model(dir / "bad.ckpt"), DataError);
    CHECK_THROWS_AS(load_model(dir / "missing.ckpt"), DataError);
}

TEST_CASE("train config presets and json")
{
    const TrainConfig full = TrainConfig::full_scale();
    CHECK(full.steps == 20000);
    CHECK(full.batch == 128);
    CHECK(full.lr == 1.5e-4);
    CHECK(full.crop == 224);

    TrainConfig cfg;
    from_json(nlohmann::json{{"steps", 12}, {"loss", "l1"}}, cfg);
    CHECK(cfg.steps == 12);
    CHECK(cfg.loss == LossKind::L1);
    CHECK(cfg.batch == 8);
    TrainConfig back;
    from_json(nlohmann::json(cfg), back);
    CHECK(back.steps == 12);
    CHECK(back.loss == LossKind::L1);

    cfg.batch = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("zero steps leave the model untouched")
{
    RngStream rng(8);
    std::vector<NamedImage> clear{{"a", procedural_scene(32, 32, rng)}};
    TrainConfig cfg;
    cfg.steps = 0;
    LinearPatchRestorer m = LinearPatchRestorer::identity(2, 3);
    const auto result = train_prior(clear, AugConfig{}, cfg, m);
    CHECK(result.loss_trace.empty());
    CHECK_FALSE(result.aborted);
    CHECK(m.parameters()[12] == 1.0);
    const LinearPatchRestorer ident = LinearPatchRestorer::identity(2, 3);
    CHECK(std::equal(ident.parameters().begin(), ident.parameters().end(), m.parameters().begin()));
}

TEST_CASE("empty clear set is a data error")
{
    LinearPatchRestorer m = LinearPatchRestorer::identity(1, 3);
    CHECK_THROWS_AS(train_prior(std::vector<NamedImage>{}, AugConfig{}, TrainConfig{}, m), DataError);
}

TEST_CASE("non-finite loss aborts and keeps the last good parameters")
{
    RngStream rng(9);
    std::vector<NamedImage> clear{{"a", procedural_scene(16, 16, rng)}};
    LinearPatchRestorer m(1, 3);
    std::vector<double> huge(m.parameters().size(), 1e308);
    m.set_parameters(huge);
    TrainConfig cfg;
    cfg.steps = 3;
    cfg.batch = 1;
    cfg.crop = 16;
    const auto result = train_prior(clear, AugConfig{}, cfg, m);
    CHECK(result.aborted);
    CHECK(result.loss_trace.empty());
    CHECK(m.parameters()[0] == 1e308);
}

TEST_CASE("toy training lowers the loss and is reproducible")
{
    RngStream rng(10);
    std::vector<NamedImage> clear;
    for (int i = 0; i < 6; ++i) clear.push_back({std::to_string(i), procedural_scene(64, 64, rng)});
    TrainConfig cfg;
    cfg.steps = 500;
    cfg.batch = 8;
    cfg.crop = 64;
    cfg.lr = 1e-3;
    LinearPatchRestorer a = LinearPatchRestorer::identity(2, 3);
    const auto ra = train_prior(clear, AugConfig{}, cfg, a);
    REQUIRE(ra.loss_trace.size() == 500);
    double first = 0.0, last = 0.0;
    for (int i = 0; i < 50; ++i) {
        first += ra.loss_trace[static_cast<std::size_t>(i)];
        last += ra.loss_trace[static_cast<std::size_t>(450 + i)];
    }
    CHECK(last < first);

    cfg.steps = 20;
    LinearPatchRestorer b = LinearPatchRestorer::identity(2, 3), c = LinearPatchRestorer::identity(2, 3);
    const auto rb = train_prior(clear, AugConfig{}, cfg, b);
    const auto rc = train_prior(clear, AugConfig{}, cfg, c);
    CHECK(rb.loss_trace == rc.loss_trace);
    CHECK(std::equal(b.parameters().begin(), b.parameters().end(), c.parameters().begin()));

    TempDir dir("losscsv");
    write_loss_csv(rb.loss_trace, dir / "loss.csv");
    std::ifstream in(dir / "loss.csv");
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "step,loss");
    CHECK(std::stod(row.substr(row.find(',') + 1)) == rb.loss_trace[0]);
}

}
