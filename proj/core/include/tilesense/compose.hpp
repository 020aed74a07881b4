#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tilesense/catalog.hpp"
#include "tilesense/detection.hpp"
#include "tilesense/geometry.hpp"

namespace tilesense::compose {

/// One tile position in a template, in the template frame.
struct PartSlot {
  std::string name;                    ///< e.g. "cap-left"; defaults to "<group>-<n>"
  ShapeClass shape = ShapeClass::square;
  std::optional<std::string> spec_id;  ///< color constraint, when set
  double cx = 0.0;
  double cy = 0.0;
  double theta_deg = 0.0;
};

using Alternative = std::vector<PartSlot>;

/// A group is satisfied by any one of its alternatives.
struct PartGroup {
  std::string name;
  std::vector<Alternative> alternatives;
};

struct CompositionTemplate {
  std::string id;
  std::vector<PartGroup> parts;
};

struct Tolerance {
  double pos_tol = 8.0;     ///< pixels
  double theta_tol = 10.0;  ///< degrees, after symmetry canonicalization
};

/// Slot filled by a detection whose pose is within tolerance.
struct SlotMatch {
  std::size_t group = 0;
  std::size_t slot = 0;
  std::string slot_name;
  std::size_t detection = 0;
  double pos_residual = 0.0;
  double theta_residual = 0.0;  ///< signed, degrees; rotate the tile by -residual to fix
};

struct SlotRef {
  std::size_t group = 0;
  std::size_t slot = 0;
  std::string slot_name;
  ShapeClass shape = ShapeClass::square;
};

struct CompositionResult {
  std::string template_id;
  bool complete = false;
  std::vector<std::size_t> chosen_alternatives;  ///< per group
  std::vector<SlotMatch> matched;
  std::vector<SlotRef> missing;
  std::vector<SlotMatch> misplaced;  ///< class matches but pose is outside tolerance
  std::vector<std::size_t> extra;    ///< detection indices not used by any slot
  Similarity transform;              ///< template frame -> scene (scale fixed at 1)
};

/// Read-mostly template store. Slot sizes come from the catalog (slot
/// spec_id, or the first spec of the slot's shape).
class TemplateRegistry {
 public:
  explicit TemplateRegistry(Catalog catalog);

  /// Validates and stores; returns the id. Throws std::invalid_argument for
  /// empty parts, empty alternatives, duplicate ids, unknown specs/shapes, or
  /// slot layouts that overlap by more than 1% of the smaller tile.
  std::string register_template(CompositionTemplate tmpl);

  /// Throws std::out_of_range for unknown ids.
  const CompositionTemplate& at(const std::string& id) const;
  bool contains(const std::string& id) const { return templates_.count(id) != 0; }
  std::vector<std::string> ids() const;

  const Catalog& catalog() const { return catalog_; }

  /// Spec used to realize a slot.
  const TileSpec& spec_for(const PartSlot& slot) const;
  /// Full-size pose of a slot in the template frame.
  OrientedBox slot_pose(const PartSlot& slot) const;

 private:
  Catalog catalog_;
  std::map<std::string, CompositionTemplate> templates_;
};

/// Mushroom, ice cream and house ingredients laid out for `catalog`
/// (expects the default catalog's shapes).
std::vector<CompositionTemplate> builtin_templates(const Catalog& catalog);

/// Registry holding the builtin templates over the default catalog.
const TemplateRegistry& default_registry();

/// Throws std::out_of_range for an unknown template.
CompositionResult check_composition(std::span<const Detection> detections, const std::string& template_id,
                                    const TemplateRegistry& registry, const Tolerance& tol = {});

/// Human-readable events: a single success line when complete, otherwise
/// placed/missing/nudge lines in slot order.
std::vector<std::string> feedback(const CompositionResult& result);

nlohmann::json to_json(const CompositionTemplate& tmpl);
CompositionTemplate template_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CompositionResult& result);

}  // namespace tilesense::compose
