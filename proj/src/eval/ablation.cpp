#include "drpn/eval/ablation.hpp"

#include "drpn/eval/evaluate.hpp"

namespace drpn::eval {

std::string ablation_name(model::Variant v) {
  switch (v) {
    case model::Variant::kFull: return "DRPN";
    case model::Variant::kNoDenoise: return "DRPN-D";
    case model::Variant::kNoGraph: return "DRPN-G";
    case model::Variant::kNoDenoiseNoGraph: return "DRPN-DG";
    case model::Variant::kPositiveOnly: return "DRPN-N";
    case model::Variant::kNegativeOnly: return "DRPN-P";
  }
  return "DRPN-?";
}

std::vector<model::Variant> all_variants() {
  using model::Variant;
  return {Variant::kFull,     Variant::kNoDenoise,    Variant::kNoGraph,
          Variant::kNoDenoiseNoGraph, Variant::kPositiveOnly, Variant::kNegativeOnly};
}

std::vector<AblationRow> compare_ablations(const training::TrainOptions& base, const ingest::Dataset& data,
                                           const std::filesystem::path& out_dir,
                                           const std::vector<model::Variant>& variants,
                                           const training::StepHook& hook) {
  std::vector<AblationRow> rows;
  for (auto v : variants) {
    auto options = base;
    options.model.variant = v;
    AblationRow row;
    row.variant = v;
    row.training = training::train(options, data, out_dir / model::to_string(v), hook);
    const auto loaded = training::load_model(row.training.best_checkpoint, data);
    const model::Drpn net(loaded.config, loaded.params, loaded.index);
    row.test = evaluate(net, loaded.params, data.profiles, data.splits.test, base.threads);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::pair<std::string, MetricReport>> ablation_table(const std::vector<AblationRow>& rows) {
  std::vector<std::pair<std::string, MetricReport>> out;
  for (const auto& r : rows) out.emplace_back(ablation_name(r.variant), r.test);
  return out;
}

}  // namespace drpn::eval
