#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "drpn/eval/metrics.hpp"
#include "drpn/training/trainer.hpp"

namespace drpn::eval {

struct AblationRow {
  model::Variant variant = model::Variant::kFull;
  MetricReport test;
  training::TrainResult training;
};

/// DRPN, DRPN-D, DRPN-G, DRPN-DG, DRPN-N, DRPN-P.
std::string ablation_name(model::Variant v);
std::vector<model::Variant> all_variants();

/// Trains each variant from the same seed and data under out_dir/<variant>
/// and evaluates its best checkpoint on the test split. With base.resume set,
/// finished variants are only re-evaluated.
std::vector<AblationRow> compare_ablations(const training::TrainOptions& base, const ingest::Dataset& data,
                                           const std::filesystem::path& out_dir,
                                           const std::vector<model::Variant>& variants = all_variants(),
                                           const training::StepHook& hook = {});

/// Report rows named by ablation_name, in the given order.
std::vector<std::pair<std::string, MetricReport>> ablation_table(const std::vector<AblationRow>& rows);

}  // namespace drpn::eval
