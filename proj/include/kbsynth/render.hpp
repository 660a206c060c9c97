// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "kbsynth/candidates.hpp"
#include "kbsynth/learn.hpp"

namespace kbsynth {

/// Vocabulary needed to turn chains back into entity/attribute atoms and to
/// bucket raw designs the way the training corpus was bucketed.
struct RenderContext {
  SchemaConfig schema;
  KeyRegistry registry;
  BoundaryMap boundaries;
};

struct RenderedRule {
  std::string name;
  int sourceFeatureId = -1;
  FeatureKey pattern;
  GroundingLevel level = GroundingLevel::Grounded;
  int strippedDepth = 0;
  std::vector<std::string> headVars;
  std::vector<std::string> bodyAtoms;
  std::vector<std::string> negatedAtoms;   // "not has_...(...)"
  std::vector<std::string> auxiliaryRules;  // definitions of the has_ predicates
  double weight = 0.0;
  std::string description;

  std::string asp_text() const;
};

struct KnowledgeBase {
  std::vector<RenderedRule> rules;
  RenderContext context;
  nlohmann::json provenance = nlohmann::json::object();
};

/// Lowercase `[a-z0-9_]` name built from component terminals; `not_` marks negation.
std::string rule_base_name(const FeatureKey& pattern);

RenderedRule render_feature(const Feature& f, const RenderContext& ctx, const std::string& name);
RenderedRule render_feature(const Feature& f, const RenderContext& ctx);

/// One rule per feature, names made unique with numeric suffixes.
KnowledgeBase render_knowledge_base(const std::vector<int>& features, const FeatureCatalog& catalog,
                                    const RenderContext& ctx);

/// Weight i goes to rule i; the model must list the same features in the same order.
void assign_weights(KnowledgeBase& kb, const LinearModel& model);

/// Chains of a raw design after numeric bucketing.
ChainBag design_chains(const DesignAst& ast, const RenderContext& ctx, Diagnostics* diagnostics = nullptr);

/// Occurrence count of a pattern in one design's chains; equals the design's
/// entry in the feature's frequency vector.
Count count_pattern(const FeatureKey& pattern, const ChainBag& chains);
Count detect(const RenderedRule& rule, const DesignAst& ast, const RenderContext& ctx);

/// Detection counts per rule for one design.
std::vector<Count> detect_all(const KnowledgeBase& kb, const ChainBag& chains);

struct RankedDesign {
  std::size_t index = 0;
  double score = 0.0;
  bool tied = false;  // equal score to a neighbour
};

std::vector<RankedDesign> rank_designs(const KnowledgeBase& kb, const std::vector<DesignAst>& asts,
                                       Exec exec = Exec::Parallel);

/// Sum of weight x (count in a - count in b); > 0 means a is preferred.
double preference_margin(const KnowledgeBase& kb, const std::vector<Count>& a, const std::vector<Count>& b);

std::string emit_asp(const KnowledgeBase& kb);
KnowledgeBase parse_asp(std::string_view text);

nlohmann::json knowledge_base_to_json(const KnowledgeBase& kb);

nlohmann::json registry_to_json(const KeyRegistry& registry);
KeyRegistry registry_from_json(const nlohmann::json& j);
nlohmann::json boundaries_to_json(const BoundaryMap& boundaries);
BoundaryMap boundaries_from_json(const nlohmann::json& j);

}  // namespace kbsynth
