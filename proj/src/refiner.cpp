#include "hazeprior/refiner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "hazeprior/error.hpp"

namespace hazeprior {

std::vector<int> axis_positions(int dim, int patch, int stride)
{
    if (patch < 1 || stride < 1) throw std::invalid_argument("tile_positions: patch and stride must be positive");
    if (stride > patch) throw std::invalid_argument("tile_positions: stride larger than the patch leaves gaps");
    if (patch > dim) {
        throw std::invalid_argument("tile_positions: patch " + std::to_string(patch) + " exceeds dimension " +
                                    std::to_string(dim));
    }
    std::vector<int> positions;
    for (int p = 0; p + patch <= dim; p += stride) positions.push_back(p);
    if (positions.back() + patch < dim) positions.push_back(dim - patch);
    return positions;
}

std::vector<TilePosition> tile_positions(int height, int width, int patch, int stride)
{
    const auto rows = axis_positions(height, patch, stride);
    const auto cols = axis_positions(width, patch, stride);
    std::vector<TilePosition> tiles;
    tiles.reserve(rows.size() * cols.size());
    for (int top : rows) {
        for (int left : cols) tiles.push_back({top, left});
    }
    return tiles;
}

ConfidenceMap accumulate_patches(const Shape& shape, std::span<const TilePosition> positions,
                                 std::span<const Field> outputs)
{
    if (positions.size() != outputs.size()) {
        throw std::invalid_argument("accumulate_patches: one output per position is required");
    }
    Field mean(shape);
    Field m2(shape);
    std::vector<int> count(static_cast<std::size_t>(shape.height) * shape.width, 0);
    for (std::size_t p = 0; p < positions.size(); ++p) {
        const Field& out = outputs[p];
        const auto [top, left] = positions[p];
        if (out.channels() != shape.channels || top < 0 || left < 0 || top + out.height() > shape.height ||
            left + out.width() > shape.width) {
            throw std::invalid_argument("accumulate_patches: patch output outside the image");
        }
        for (int y = 0; y < out.height(); ++y) {
            for (int x = 0; x < out.width(); ++x) {
                const int n = ++count[static_cast<std::size_t>(top + y) * shape.width + (left + x)];
                for (int c = 0; c < shape.channels; ++c) {
                    const double v = out.at(y, x, c);
                    double& mu = mean.at(top + y, left + x, c);
                    const double delta = v - mu;
                    mu += delta / n;
                    m2.at(top + y, left + x, c) += delta * (v - mu);
                }
            }
        }
    }
    for (int y = 0; y < shape.height; ++y) {
        for (int x = 0; x < shape.width; ++x) {
            const int n = count[static_cast<std::size_t>(y) * shape.width + x];
            if (n == 0) throw std::invalid_argument("accumulate_patches: pixel not covered by any patch");
            for (int c = 0; c < shape.channels; ++c) {
                double& var = m2.at(y, x, c);
                var = std::max(0.0, var / n);
            }
        }
    }
    return {Image::clamped(mean), std::move(m2)};
}

ConfidenceMap ensemble_predict(const RestorerModel& teacher, const Image& image, int patch, int stride)
{
    const auto positions = tile_positions(image.height(), image.width(), patch, stride);
    std::vector<Field> outputs;
    outputs.reserve(positions.size());
    for (const auto& [top, left] : positions) {
        outputs.push_back(teacher.forward(crop(image, top, left, patch, patch)).to_field());
    }
    return accumulate_patches(image.shape(), positions, outputs);
}

BinaryMask confidence_mask(const ConfidenceMap& conf, double v1_thr)
{
    if (v1_thr < 0.0 || std::isnan(v1_thr)) throw std::invalid_argument("confidence_mask: v1_thr must be >= 0");
    BinaryMask mask{Field(conf.variance.shape())};
    const auto var = conf.variance.data();
    auto m = mask.mask.data();
    for (std::size_t i = 0; i < var.size(); ++i) m[i] = var[i] <= v1_thr ? 1.0 : 0.0;
    return mask;
}

namespace {

void check_masked(const Field& pred, const Image& pseudo, const BinaryMask& mask)
{
    if (pred.shape() != pseudo.shape() || pred.shape() != mask.mask.shape()) {
        throw std::invalid_argument("masked_l1: prediction, pseudo label and mask dimensions differ");
    }
}

}  // namespace

double masked_l1(std::span<const Field> pred, std::span<const Image> pseudo, std::span<const BinaryMask> masks)
{
    if (pred.size() != pseudo.size() || pred.size() != masks.size() || pred.empty()) {
        throw std::invalid_argument("masked_l1: batch sizes differ or are empty");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        check_masked(pred[i], pseudo[i], masks[i]);
        const auto p = pred[i].data();
        const auto y = pseudo[i].data();
        const auto m = masks[i].mask.data();
        double acc = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) acc += std::abs(p[k] - y[k]) * m[k];
        total += acc / static_cast<double>(p.size());
    }
    return total / static_cast<double>(pred.size());
}

Field masked_l1_grad(const Field& pred, const Image& pseudo, const BinaryMask& mask, int batch_size)
{
    check_masked(pred, pseudo, mask);
    Field grad(pred.shape());
    const auto p = pred.data();
    const auto y = pseudo.data();
    const auto m = mask.mask.data();
    auto g = grad.data();
    const double scale = 1.0 / (static_cast<double>(p.size()) * batch_size);
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double d = p[k] - y[k];
        g[k] = static_cast<double>((d > 0.0) - (d < 0.0)) * m[k] * scale;
    }
    return grad;
}

std::vector<double> ema_update(std::span<const double> teacher, std::span<const double> student, double alpha)
{
    if (teacher.size() != student.size()) throw std::invalid_argument("ema_update: parameter lengths differ");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("ema_update: alpha must be in (0, 1)");
    std::vector<double> out(teacher.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * teacher[i] + (1.0 - alpha) * student[i];
    return out;
}

GateResult iqa_gate(const MetricHandle& metric, const RestorerModel& old_model, const RestorerModel& new_model,
                    std::span<const Image> probes, double v2_thr, GateScoreMode mode)
{
    if (probes.empty()) throw std::invalid_argument("iqa_gate: probe set is empty");
    GateResult result;
    double total = 0.0;
    try {
        for (const Image& probe : probes) {
            const double after = score(metric, new_model.forward(probe));
            const double before = score(metric, old_model.forward(probe));
            total += mode == GateScoreMode::Difference ? after - before : after + before;
        }
    } catch (const std::exception& e) {
        result.error = e.what();
        result.score = std::numeric_limits<double>::quiet_NaN();
        return result;
    }
    result.score = total / static_cast<double>(probes.size());
    result.accept = result.score > v2_thr;
    return result;
}

AugConfig RefineConfig::non_severe_defaults()
{
    AugConfig aug;
    aug.severity_ratio = 0.0;
    return aug;
}

RefineConfig RefineConfig::full_scale()
{
    RefineConfig cfg;
    cfg.patch = 224;
    cfg.stride = 4;
    cfg.v1_thr = 0.005;
    cfg.v2_thr = 0.0;
    cfg.ema_alpha = 0.9999;
    cfg.steps = 10000;
    cfg.batch = 16;
    cfg.lr = 2e-5;
    return cfg;
}

void RefineConfig::validate() const
{
    if (patch < 1 || stride < 1) throw std::invalid_argument("RefineConfig: patch and stride must be positive");
    if (v1_thr < 0.0) throw std::invalid_argument("RefineConfig: v1_thr must be non-negative");
    if (std::isnan(v2_thr)) throw std::invalid_argument("RefineConfig: v2_thr must not be NaN");
    if (!(ema_alpha > 0.0 && ema_alpha < 1.0)) throw std::invalid_argument("RefineConfig: ema_alpha must be in (0, 1)");
    if (steps < 0 || batch < 1) throw std::invalid_argument("RefineConfig: invalid steps or batch");
    if (!(lr > 0.0)) throw std::invalid_argument("RefineConfig: lr must be positive");
    if (probe_count < 1) throw std::invalid_argument("RefineConfig: probe_count must be at least 1");
    if (gate_every < 1) throw std::invalid_argument("RefineConfig: gate_every must be at least 1");
    student_aug.validate();
}

namespace {

nlohmann::json real_to_json(double v)
{
    if (std::isfinite(v)) return v;
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

double real_from_json(const nlohmann::json& j)
{
    if (j.is_string()) return std::stod(j.get<std::string>());
    return j.get<double>();
}

}  // namespace

void to_json(nlohmann::json& j, const RefineConfig& c)
{
    j = nlohmann::json{{"patch", c.patch},
                       {"stride", c.stride},
                       {"v1_thr", real_to_json(c.v1_thr)},
                       {"v2_thr", real_to_json(c.v2_thr)},
                       {"ema_alpha", c.ema_alpha},
                       {"steps", c.steps},
                       {"batch", c.batch},
                       {"lr", c.lr},
                       {"beta1", c.adam.beta1},
                       {"beta2", c.adam.beta2},
                       {"adam_epsilon", c.adam.epsilon},
                       {"student_augment", c.student_aug},
                       {"metric", c.metric.name()},
                       {"probe_count", c.probe_count},
                       {"probe_mode", c.probe_mode == ProbeMode::HeldOut ? "held_out" : "current_image"},
                       {"score_mode", c.score_mode == GateScoreMode::Difference ? "difference" : "sum"},
                       {"gate_every", c.gate_every},
                       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, RefineConfig& c)
{
    const RefineConfig d = c;
    c.patch = j.value("patch", d.patch);
    c.stride = j.value("stride", d.stride);
    c.v1_thr = j.contains("v1_thr") ? real_from_json(j.at("v1_thr")) : d.v1_thr;
    c.v2_thr = j.contains("v2_thr") ? real_from_json(j.at("v2_thr")) : d.v2_thr;
    c.ema_alpha = j.value("ema_alpha", d.ema_alpha);
    c.steps = j.value("steps", d.steps);
    c.batch = j.value("batch", d.batch);
    c.lr = j.value("lr", d.lr);
    c.adam.beta1 = j.value("beta1", d.adam.beta1);
    c.adam.beta2 = j.value("beta2", d.adam.beta2);
    c.adam.epsilon = j.value("adam_epsilon", d.adam.epsilon);
    if (j.contains("student_augment")) {
        c.student_aug = d.student_aug;
        from_json(j.at("student_augment"), c.student_aug);
    }
    if (j.contains("metric")) c.metric = MetricHandle::parse(j.at("metric").get<std::string>());
    c.probe_count = j.value("probe_count", d.probe_count);
    if (j.contains("probe_mode")) {
        const auto mode = j.at("probe_mode").get<std::string>();
        if (mode == "held_out") {
            c.probe_mode = ProbeMode::HeldOut;
        } else if (mode == "current_image") {
            c.probe_mode = ProbeMode::CurrentImage;
        } else {
            throw std::invalid_argument("unknown probe_mode '" + mode + "'");
        }
    }
    if (j.contains("score_mode")) {
        const auto mode = j.at("score_mode").get<std::string>();
        if (mode == "difference") {
            c.score_mode = GateScoreMode::Difference;
        } else if (mode == "sum") {
            c.score_mode = GateScoreMode::Sum;
        } else {
            throw std::invalid_argument("unknown score_mode '" + mode + "'");
        }
    }
    c.gate_every = j.value("gate_every", d.gate_every);
    c.seed = j.value("seed", d.seed);
}

TeacherStudentState TeacherStudentState::from_prior(const RestorerModel& prior)
{
    TeacherStudentState state;
    state.teacher = prior.clone();
    state.student = prior.clone();
    state.optim = OptimState(prior.parameters().size());
    return state;
}

void to_json(nlohmann::json& j, const AuditRecord& r)
{
    j = nlohmann::json{{"step", r.step},
                       {"image", r.image},
                       {"loss", real_to_json(r.loss)},
                       {"score", real_to_json(r.score)},
                       {"accepted", r.accepted}};
    if (!r.error.empty()) j["error"] = r.error;
}

namespace {

Image center_crop(const Image& image, int size)
{
    const int h = std::min(size, image.height());
    const int w = std::min(size, image.width());
    return crop(image, (image.height() - h) / 2, (image.width() - w) / 2, h, w);
}

}  // namespace

RefineResult refine_loop(TeacherStudentState& state, const std::vector<NamedImage>& unlabeled,
                         const RefineConfig& cfg, const LightBank& bank, const RefineObserver& observer)
{
    cfg.validate();
    if (unlabeled.empty()) throw DataError("refine_loop: unlabeled image set is empty");
    if (!state.teacher || !state.student) throw DataError("refine_loop: state has no teacher or student");
    if (state.teacher->architecture() != state.student->architecture() ||
        state.teacher->parameters().size() != state.student->parameters().size() ||
        state.optim.m.size() != state.student->parameters().size()) {
        throw DataError("refine_loop: teacher, student and optimizer state do not match");
    }
    for (const auto& item : unlabeled) {
        if (item.image.height() < cfg.patch || item.image.width() < cfg.patch) {
            throw DataError("refine_loop: image '" + item.id + "' is smaller than the patch size");
        }
    }

    RngStream rng(cfg.seed, 0);
    RefineResult result;

    // Held-out probes are a seeded subset excluded from training; a single
    // image can only be scored against itself.
    std::vector<std::size_t> order(unlabeled.size());
    std::iota(order.begin(), order.end(), 0);
    RngStream probe_rng = rng.child(0x70726F6265ull);
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[static_cast<std::size_t>(probe_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    }
    const bool held_out = cfg.probe_mode == ProbeMode::HeldOut && unlabeled.size() > 1;
    const std::size_t n_probes = held_out ? std::min<std::size_t>(cfg.probe_count, unlabeled.size() - 1) : 0;
    std::vector<Image> probes;
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i < n_probes) {
            probes.push_back(center_crop(unlabeled[order[i]].image, cfg.patch));
            result.probe_ids.push_back(unlabeled[order[i]].id);
        } else {
            pool.push_back(order[i]);
        }
    }
    std::sort(pool.begin(), pool.end());

    RestorerModel& student = *state.student;
    const std::size_t n_params = student.parameters().size();

    for (int step = 0; step < cfg.steps; ++step) {
        const std::vector<double> before(student.parameters().begin(), student.parameters().end());
        const OptimState optim_before = state.optim;
        const std::unique_ptr<RestorerModel> old_student = student.clone();

        AuditRecord rec;
        rec.step = step;
        std::vector<Image> current_probes;
        double loss_sum = 0.0;
        std::vector<double> params = before;

        std::string numeric_error;
        try {
        for (int inner = 0; inner < cfg.gate_every; ++inner) {
            const std::size_t pick = pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
            const NamedImage& item = unlabeled[pick];
            rec.image += (rec.image.empty() ? "" : ",") + item.id;
            if (!held_out) current_probes.push_back(center_crop(item.image, cfg.patch));

            const ConfidenceMap conf = ensemble_predict(*state.teacher, item.image, cfg.patch, cfg.stride);
            const BinaryMask mask = confidence_mask(conf, cfg.v1_thr);

            std::vector<double> grad(n_params, 0.0);
            double batch_loss = 0.0;
            for (int b = 0; b < cfg.batch; ++b) {
                const Image degraded = augment(item.image, cfg.student_aug, rng, bank).image;
                const int top = static_cast<int>(rng.uniform_int(0, item.image.height() - cfg.patch));
                const int left = static_cast<int>(rng.uniform_int(0, item.image.width() - cfg.patch));
                const Image input = crop(degraded, top, left, cfg.patch, cfg.patch);
                const Image pseudo = crop(conf.mean, top, left, cfg.patch, cfg.patch);
                const BinaryMask m{crop(mask.mask, top, left, cfg.patch, cfg.patch)};

                const Field pred = student.forward_raw(input);
                batch_loss += masked_l1(std::span(&pred, 1), std::span(&pseudo, 1), std::span(&m, 1)) / cfg.batch;
                const auto g = student.backward(input, masked_l1_grad(pred, pseudo, m, cfg.batch));
                for (std::size_t i = 0; i < n_params; ++i) grad[i] += g[i];
            }
            loss_sum += batch_loss;
            adam_step(params, grad, state.optim, cfg.lr, cfg.adam);
            student.set_parameters(params);
        }
        } catch (const NumericError& e) {
            numeric_error = e.what();
        }
        rec.loss = loss_sum / cfg.gate_every;

        const std::span<const Image> gate_probes = held_out ? std::span<const Image>(probes)
                                                            : std::span<const Image>(current_probes);
        GateResult gate;
        if (numeric_error.empty()) {
            gate = iqa_gate(cfg.metric, *old_student, student, gate_probes, cfg.v2_thr, cfg.score_mode);
        } else {
            gate.score = std::numeric_limits<double>::quiet_NaN();
            gate.error = numeric_error;
        }
        rec.score = gate.score;
        rec.error = gate.error;
        rec.accepted = gate.accept;
        if (gate.accept) {
            state.teacher->set_parameters(ema_update(state.teacher->parameters(), student.parameters(), cfg.ema_alpha));
            ++state.accepted;
        } else {
            student.set_parameters(before);
            state.optim = optim_before;
            ++state.rejected;
        }
        if (observer) observer(rec, state);
        result.audit.push_back(std::move(rec));
    }
    return result;
}

RefineResult refine_loop(TeacherStudentState& state, const std::filesystem::path& unlabeled_dir,
                         const RefineConfig& cfg, const LightBank& bank)
{
    return refine_loop(state, load_directory(unlabeled_dir), cfg, bank);
}

void write_audit_jsonl(const std::vector<AuditRecord>& audit, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write audit log: " + path.string());
    for (const auto& rec : audit) out << nlohmann::json(rec).dump() << '\n';
}

}  // namespace hazeprior
