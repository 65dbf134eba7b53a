#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hazeprior/augment.hpp"
#include "hazeprior/image_io.hpp"
#include "hazeprior/iqa.hpp"
#include "hazeprior/optim.hpp"
#include "hazeprior/restorer.hpp"

namespace hazeprior {

struct TilePosition {
    int top = 0;
    int left = 0;
    bool operator==(const TilePosition&) const = default;
};

/// Offsets 0, stride, 2*stride, ... along one axis; when the last window
/// stops short of the border, one more window flush with the border is added.
std::vector<int> axis_positions(int dim, int patch, int stride);

/// Row-major cartesian product of the per-axis positions. Every pixel is
/// covered by at least one patch. Throws when patch exceeds a dimension or
/// stride exceeds patch.
std::vector<TilePosition> tile_positions(int height, int width, int patch, int stride);

/// Per-pixel mean (y) and population variance (u) of overlapping patch predictions.
struct ConfidenceMap {
    Image mean;
    Field variance;
};

struct BinaryMask {
    Field mask;  // values in {0, 1}
};

/// Folds per-patch outputs into a ConfidenceMap using Welford updates, so
/// pixels whose predictions agree exactly get variance exactly 0.
ConfidenceMap accumulate_patches(const Shape& shape, std::span<const TilePosition> positions,
                                 std::span<const Field> outputs);

ConfidenceMap ensemble_predict(const RestorerModel& teacher, const Image& image, int patch, int stride);

/// 1 where variance <= v1_thr (low variance = confident), else 0.
BinaryMask confidence_mask(const ConfidenceMap& conf, double v1_thr);

/// (1/N) sum_i mean(|pred_i - pseudo_i| * mask_i) over a batch of N samples.
double masked_l1(std::span<const Field> pred, std::span<const Image> pseudo, std::span<const BinaryMask> masks);

/// Gradient of one sample's term of masked_l1 for a batch of `batch_size`.
Field masked_l1_grad(const Field& pred, const Image& pseudo, const BinaryMask& mask, int batch_size);

/// alpha * teacher + (1 - alpha) * student, elementwise.
std::vector<double> ema_update(std::span<const double> teacher, std::span<const double> student, double alpha);

enum class GateScoreMode {
    Difference,  // mean over probes of IQA(new) - IQA(old)
    Sum,         // mean over probes of IQA(new) + IQA(old)
};

struct GateResult {
    bool accept = false;
    double score = 0.0;
    std::string error;  // set when the metric failed; the gate then rejects
};

GateResult iqa_gate(const MetricHandle& metric, const RestorerModel& old_model, const RestorerModel& new_model,
                    std::span<const Image> probes, double v2_thr, GateScoreMode mode = GateScoreMode::Difference);

enum class ProbeMode { HeldOut, CurrentImage };

/// Defaults are desk-scale for the sizes (patch, steps, batch, lr) and use
/// the full-scale thresholds and EMA weight; full_scale() pins every value.
struct RefineConfig {
    int patch = 64;
    int stride = 8;
    double v1_thr = 0.005;
    double v2_thr = 0.0;
    double ema_alpha = 0.9999;
    int steps = 200;
    int batch = 4;
    double lr = 1e-4;
    AdamConfig adam{};
    AugConfig student_aug = non_severe_defaults();
    MetricHandle metric = MetricHandle::native_contrast();
    int probe_count = 4;
    ProbeMode probe_mode = ProbeMode::HeldOut;
    GateScoreMode score_mode = GateScoreMode::Difference;
    /// Optimizer steps folded into one gated update.
    int gate_every = 1;
    std::uint64_t seed = 0;

    void validate() const;

    static AugConfig non_severe_defaults();
    /// 224 patches at stride 4, v1 0.005, v2 0, alpha 0.9999, lr 2e-5, 10,000 steps of batch 16.
    static RefineConfig full_scale();
};

void to_json(nlohmann::json& j, const RefineConfig& cfg);
void from_json(const nlohmann::json& j, RefineConfig& cfg);

struct TeacherStudentState {
    std::unique_ptr<RestorerModel> teacher;
    std::unique_ptr<RestorerModel> student;
    OptimState optim;
    int accepted = 0;
    int rejected = 0;

    /// Teacher and student both start as copies of the self-prior model.
    static TeacherStudentState from_prior(const RestorerModel& prior);
};

struct AuditRecord {
    int step = 0;
    std::string image;
    double loss = 0.0;
    double score = 0.0;
    bool accepted = false;
    std::string error;
};

void to_json(nlohmann::json& j, const AuditRecord& rec);

struct RefineResult {
    std::vector<AuditRecord> audit;
    std::vector<std::string> probe_ids;
};

/// Called after every gated update with the record and the current state.
using RefineObserver = std::function<void(const AuditRecord&, const TeacherStudentState&)>;

/// Teacher-student refinement on unlabeled images. Each gated update picks
/// an image, builds the teacher's ensemble pseudo label and confidence mask,
/// degrades the image for the student, trains on aligned random crops with
/// masked L1, then asks the IQA gate. Accepted updates move the teacher by
/// EMA; rejected ones restore the student and its optimizer state exactly.
RefineResult refine_loop(TeacherStudentState& state, const std::vector<NamedImage>& unlabeled,
                         const RefineConfig& cfg, const LightBank& bank = {}, const RefineObserver& observer = {});

RefineResult refine_loop(TeacherStudentState& state, const std::filesystem::path& unlabeled_dir,
                         const RefineConfig& cfg, const LightBank& bank = {});

/// One JSON object per line: {"step","image","loss","score","accepted"} plus "error" when set.
void write_audit_jsonl(const std::vector<AuditRecord>& audit, const std::filesystem::path& path);

}  // namespace hazeprior
