#include "tilesense/compose.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "tilesense/json_util.hpp"

namespace tilesense::compose {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

/// Wraps into (-period/2, period/2].
double signed_residual(double actual, double expected, SymmetryOrder sym) {
  const double p = sym.period();
  double d = canonical_theta(actual - expected, sym);
  if (d > p / 2.0) d -= p;
  return d;
}

bool compatible(const PartSlot& slot, const Detection& det) {
  if (det.shape != slot.shape) return false;
  return !slot.spec_id || det.spec_id == *slot.spec_id;
}

struct Rigid {
  double rotation = 0.0;  // degrees
  Point2 t{};

  Point2 apply(Point2 p) const { return rotate(p, rotation) + t; }
};

struct Pair {
  std::size_t slot;
  std::size_t det;
  double pos;
  double theta;  // signed
};

struct AltEval {
  std::vector<Pair> inliers;
  std::vector<Pair> misplaced;
  std::vector<std::size_t> missing;
  double residual = 0.0;
};

struct HypothesisEval {
  std::vector<std::size_t> chosen;
  std::vector<AltEval> groups;
  std::size_t inliers = 0;
  double residual = 0.0;
};

Pair make_pair(const PartSlot& slot, std::size_t si, const Detection& det, std::size_t di, const Rigid& T) {
  const Point2 expected = T.apply({slot.cx, slot.cy});
  const double pos = distance(expected, det.pose.center());
  const double th = signed_residual(det.pose.theta, slot.theta_deg + T.rotation, symmetry_of(slot.shape));
  return {si, di, pos, th};
}

AltEval evaluate_alternative(const Alternative& alt, std::span<const Detection> dets,
                             const std::vector<bool>& used, const Rigid& T, const Tolerance& tol) {
  std::vector<Pair> pairs;
  for (std::size_t s = 0; s < alt.size(); ++s) {
    for (std::size_t d = 0; d < dets.size(); ++d) {
      if (used[d] || !compatible(alt[s], dets[d])) continue;
      pairs.push_back(make_pair(alt[s], s, dets[d], d, T));
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return std::tie(a.pos, a.slot, a.det) < std::tie(b.pos, b.slot, b.det);
  });

  AltEval ev;
  std::vector<bool> slot_done(alt.size(), false);
  std::vector<bool> det_done(dets.size(), false);
  for (const Pair& p : pairs) {
    if (slot_done[p.slot] || det_done[p.det]) continue;
    if (p.pos > tol.pos_tol || std::abs(p.theta) > tol.theta_tol) continue;
    slot_done[p.slot] = det_done[p.det] = true;
    ev.inliers.push_back(p);
    ev.residual += p.pos + std::abs(p.theta);
  }
  for (const Pair& p : pairs) {
    if (slot_done[p.slot] || det_done[p.det]) continue;
    slot_done[p.slot] = det_done[p.det] = true;
    ev.misplaced.push_back(p);
  }
  for (std::size_t s = 0; s < alt.size(); ++s) {
    if (!slot_done[s]) ev.missing.push_back(s);
  }
  return ev;
}

// Better alternative: more inliers, then more filled slots, then lower residual.
bool better_alt(const AltEval& a, const AltEval& b) {
  if (a.inliers.size() != b.inliers.size()) return a.inliers.size() > b.inliers.size();
  const std::size_t fa = a.inliers.size() + a.misplaced.size();
  const std::size_t fb = b.inliers.size() + b.misplaced.size();
  if (fa != fb) return fa > fb;
  return a.residual < b.residual;
}

HypothesisEval evaluate(const CompositionTemplate& tmpl, std::span<const Detection> dets, const Rigid& T,
                        const Tolerance& tol) {
  HypothesisEval h;
  std::vector<bool> used(dets.size(), false);
  for (const PartGroup& group : tmpl.parts) {
    std::size_t best = 0;
    AltEval best_eval = evaluate_alternative(group.alternatives[0], dets, used, T, tol);
    for (std::size_t a = 1; a < group.alternatives.size(); ++a) {
      AltEval ev = evaluate_alternative(group.alternatives[a], dets, used, T, tol);
      if (better_alt(ev, best_eval)) {
        best = a;
        best_eval = std::move(ev);
      }
    }
    for (const Pair& p : best_eval.inliers) used[p.det] = true;
    for (const Pair& p : best_eval.misplaced) used[p.det] = true;
    h.inliers += best_eval.inliers.size();
    h.residual += best_eval.residual;
    h.chosen.push_back(best);
    h.groups.push_back(std::move(best_eval));
  }
  return h;
}

bool better_hypothesis(const HypothesisEval& a, const HypothesisEval& b) {
  if (a.inliers != b.inliers) return a.inliers > b.inliers;
  return a.residual < b.residual;
}

// Least-squares rigid fit of slot centers onto detection centers.
std::optional<Rigid> refit(const CompositionTemplate& tmpl, std::span<const Detection> dets,
                           const HypothesisEval& h) {
  std::vector<std::pair<Point2, Point2>> corr;
  for (std::size_t g = 0; g < h.groups.size(); ++g) {
    const Alternative& alt = tmpl.parts[g].alternatives[h.chosen[g]];
    for (const Pair& p : h.groups[g].inliers) {
      corr.emplace_back(Point2{alt[p.slot].cx, alt[p.slot].cy}, dets[p.det].pose.center());
    }
  }
  if (corr.size() < 2) return std::nullopt;
  Point2 ms{};
  Point2 md{};
  for (const auto& [s, d] : corr) {
    ms = ms + s;
    md = md + d;
  }
  const double inv = 1.0 / static_cast<double>(corr.size());
  ms = ms * inv;
  md = md * inv;
  double sc = 0.0;
  double sd = 0.0;
  for (const auto& [s, d] : corr) {
    sc += cross(s - ms, d - md);
    sd += dot(s - ms, d - md);
  }
  Rigid T;
  T.rotation = std::atan2(sc, sd) * kRadToDeg;
  T.t = md - rotate(ms, T.rotation);
  return T;
}

std::string slot_label(const PartGroup& group, const PartSlot& slot, std::size_t index) {
  if (!slot.name.empty()) return slot.name;
  return group.name + "-" + std::to_string(index);
}

OrientedBox place_vertex(const TileSpec& spec, double theta, std::size_t vertex, Point2 at) {
  const Polygon model = model_polygon(spec.shape, spec.w, spec.h);
  const Point2 c = at - rotate(model[vertex], theta);
  return {c.x, c.y, spec.w, spec.h, normalize_deg(theta)};
}

const TileSpec& first_of_shape(const Catalog& catalog, ShapeClass shape) {
  for (const TileSpec& s : catalog.specs()) {
    if (s.shape == shape) return s;
  }
  throw std::invalid_argument("catalog has no spec of shape " + std::string(to_string(shape)));
}

PartSlot slot_at(const std::string& name, const TileSpec& spec, double theta, std::size_t vertex, Point2 at) {
  const OrientedBox pose = place_vertex(spec, theta, vertex, at);
  return {name, spec.shape, spec.id, pose.cx, pose.cy, pose.theta};
}

}  // namespace

TemplateRegistry::TemplateRegistry(Catalog catalog) : catalog_(std::move(catalog)) {}

const TileSpec& TemplateRegistry::spec_for(const PartSlot& slot) const {
  if (slot.spec_id) {
    const TileSpec& s = catalog_.at(*slot.spec_id);
    if (s.shape != slot.shape) {
      throw std::invalid_argument("slot " + slot.name + ": spec " + s.id + " is not a " +
                                  std::string(to_string(slot.shape)));
    }
    return s;
  }
  return first_of_shape(catalog_, slot.shape);
}

OrientedBox TemplateRegistry::slot_pose(const PartSlot& slot) const {
  const TileSpec& spec = spec_for(slot);
  return make_oriented_box(slot.cx, slot.cy, spec.w, spec.h, slot.theta_deg);
}

std::string TemplateRegistry::register_template(CompositionTemplate tmpl) {
  if (tmpl.id.empty()) throw std::invalid_argument("template id must not be empty");
  if (templates_.count(tmpl.id)) throw std::invalid_argument("duplicate template id: " + tmpl.id);
  if (tmpl.parts.empty()) throw std::invalid_argument("template " + tmpl.id + " has no part groups");

  struct Placed {
    std::size_t group;
    std::size_t alt;
    Polygon poly;
    double area;
  };
  std::vector<Placed> placed;
  for (std::size_t g = 0; g < tmpl.parts.size(); ++g) {
    PartGroup& group = tmpl.parts[g];
    if (group.name.empty()) group.name = "part" + std::to_string(g);
    if (group.alternatives.empty()) {
      throw std::invalid_argument("template " + tmpl.id + ": group " + group.name + " has no alternatives");
    }
    for (std::size_t a = 0; a < group.alternatives.size(); ++a) {
      Alternative& alt = group.alternatives[a];
      if (alt.empty()) {
        throw std::invalid_argument("template " + tmpl.id + ": group " + group.name + " has an empty alternative");
      }
      for (std::size_t s = 0; s < alt.size(); ++s) {
        PartSlot& slot = alt[s];
        slot.name = slot_label(group, slot, s);
        if (!std::isfinite(slot.cx) || !std::isfinite(slot.cy) || !std::isfinite(slot.theta_deg)) {
          throw std::invalid_argument("template " + tmpl.id + ": slot " + slot.name + " has non-finite pose");
        }
        const TileSpec& spec = spec_for(slot);
        Polygon poly = polygon_of(spec.shape, slot_pose(slot));
        const double area = polygon_area(poly);
        placed.push_back({g, a, std::move(poly), area});
      }
    }
  }
  for (std::size_t i = 0; i < placed.size(); ++i) {
    for (std::size_t j = i + 1; j < placed.size(); ++j) {
      const Placed& p = placed[i];
      const Placed& q = placed[j];
      if (p.group == q.group && p.alt != q.alt) continue;
      const double inter = intersection_area(p.poly, q.poly);
      if (inter > 0.01 * std::min(p.area, q.area)) {
        throw std::invalid_argument("template " + tmpl.id + ": slots overlap beyond the packing limit");
      }
    }
  }
  std::string id = tmpl.id;
  templates_.emplace(id, std::move(tmpl));
  return id;
}

const CompositionTemplate& TemplateRegistry::at(const std::string& id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw std::out_of_range("unknown template: " + id);
  return it->second;
}

std::vector<std::string> TemplateRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, t] : templates_) out.push_back(id);
  return out;
}

std::vector<CompositionTemplate> builtin_templates(const Catalog& catalog) {
  const TileSpec& quarter = first_of_shape(catalog, ShapeClass::quarter_circle);
  const TileSpec& rect = first_of_shape(catalog, ShapeClass::rectangle);
  const TileSpec& right = first_of_shape(catalog, ShapeClass::right_triangle);
  const TileSpec& equi = first_of_shape(catalog, ShapeClass::equilateral_triangle);
  const TileSpec& semi = first_of_shape(catalog, ShapeClass::semicircle);
  const TileSpec& square = first_of_shape(catalog, ShapeClass::square);

  // Template frames: origin at the seam between the two halves, y pointing
  // down the image (cap/roof/scoop above, stem/body/cone below).
  std::vector<CompositionTemplate> out;

  // Mushroom: two quarter circles back to back form the cap; the stem is two
  // rectangles side by side, or two right triangles joined on the hypotenuse.
  {
    const double rw = rect.h;  // rectangles stand upright
    CompositionTemplate t{"mushroom", {}};
    t.parts.push_back({"cap",
                       {{slot_at("cap-left", quarter, 180.0, 0, {0, 0}),
                         slot_at("cap-right", quarter, 270.0, 0, {0, 0})}}});
    const double side = right.w;
    t.parts.push_back(
        {"stem",
         {{PartSlot{"stem-left", rect.shape, rect.id, -rw / 2, rect.w / 2, 90.0},
           PartSlot{"stem-right", rect.shape, rect.id, rw / 2, rect.w / 2, 90.0}},
          {slot_at("stem-left", right, 270.0, 0, {-side / 2, right.h}),
           slot_at("stem-right", right, 90.0, 0, {side / 2, 0})}}});
    out.push_back(std::move(t));
  }
  // Ice cream: semicircle scoop on an inverted equilateral cone.
  {
    CompositionTemplate t{"ice_cream", {}};
    t.parts.push_back({"scoop", {{slot_at("scoop", semi, 180.0, 0, {-semi.w / 2, 0})}}});
    t.parts.push_back({"cone", {{slot_at("cone", equi, 0.0, 0, {-equi.w / 2, 0})}}});
    out.push_back(std::move(t));
  }
  // House: square body; roof is a triangle or a semicircular dome.
  {
    CompositionTemplate t{"house", {}};
    t.parts.push_back({"roof",
                       {{slot_at("roof", equi, 180.0, 0, {equi.w / 2, 0})},
                        {slot_at("roof", semi, 180.0, 0, {-semi.w / 2, 0})}}});
    t.parts.push_back({"body", {{PartSlot{"body", square.shape, square.id, 0.0, square.h / 2, 0.0}}}});
    out.push_back(std::move(t));
  }
  return out;
}

const TemplateRegistry& default_registry() {
  static const TemplateRegistry registry = [] {
    TemplateRegistry r(default_catalog());
    for (CompositionTemplate& t : builtin_templates(default_catalog())) r.register_template(std::move(t));
    return r;
  }();
  return registry;
}

CompositionResult check_composition(std::span<const Detection> detections, const std::string& template_id,
                                    const TemplateRegistry& registry, const Tolerance& tol) {
  const CompositionTemplate& tmpl = registry.at(template_id);

  std::optional<HypothesisEval> best;
  Rigid best_T;
  auto consider = [&](const Rigid& T) {
    HypothesisEval h = evaluate(tmpl, detections, T, tol);
    if (!best || better_hypothesis(h, *best)) {
      best = std::move(h);
      best_T = T;
    }
  };

  for (const PartGroup& group : tmpl.parts) {
    for (const Alternative& alt : group.alternatives) {
      for (const PartSlot& slot : alt) {
        const SymmetryOrder sym = symmetry_of(slot.shape);
        for (const Detection& det : detections) {
          if (!compatible(slot, det)) continue;
          for (int j = 0; j < sym.k; ++j) {
            Rigid T;
            T.rotation = det.pose.theta - slot.theta_deg - j * sym.period();
            T.t = det.pose.center() - rotate({slot.cx, slot.cy}, T.rotation);
            consider(T);
          }
        }
      }
    }
  }
  if (!best) consider(Rigid{});

  // Polish the winner with a least-squares fit over its inliers.
  for (int iter = 0; iter < 2; ++iter) {
    const auto T = refit(tmpl, detections, *best);
    if (!T) break;
    HypothesisEval h = evaluate(tmpl, detections, *T, tol);
    if (h.inliers < best->inliers) break;
    best = std::move(h);
    best_T = *T;
  }

  CompositionResult result;
  result.template_id = template_id;
  result.chosen_alternatives = best->chosen;
  result.transform.rotation_deg = best_T.rotation;
  result.transform.tx = best_T.t.x;
  result.transform.ty = best_T.t.y;

  std::vector<bool> used(detections.size(), false);
  bool complete = true;
  for (std::size_t g = 0; g < tmpl.parts.size(); ++g) {
    const Alternative& alt = tmpl.parts[g].alternatives[best->chosen[g]];
    const AltEval& ev = best->groups[g];
    auto to_match = [&](const Pair& p) {
      used[p.det] = true;
      return SlotMatch{g, p.slot, alt[p.slot].name, p.det, p.pos, p.theta};
    };
    for (const Pair& p : ev.inliers) result.matched.push_back(to_match(p));
    for (const Pair& p : ev.misplaced) result.misplaced.push_back(to_match(p));
    for (std::size_t s : ev.missing) result.missing.push_back({g, s, alt[s].name, alt[s].shape});
    complete = complete && ev.misplaced.empty() && ev.missing.empty();
  }
  auto by_slot = [](const auto& a, const auto& b) { return std::tie(a.group, a.slot) < std::tie(b.group, b.slot); };
  std::sort(result.matched.begin(), result.matched.end(), by_slot);
  std::sort(result.misplaced.begin(), result.misplaced.end(), by_slot);
  std::sort(result.missing.begin(), result.missing.end(), by_slot);
  for (std::size_t d = 0; d < detections.size(); ++d) {
    if (!used[d]) result.extra.push_back(d);
  }
  result.complete = complete;
  return result;
}

std::vector<std::string> feedback(const CompositionResult& result) {
  if (result.complete) return {"ingredient complete: " + result.template_id};
  std::vector<std::string> events;
  for (const SlotMatch& m : result.matched) events.push_back("part placed: " + m.slot_name);
  for (const SlotMatch& m : result.misplaced) {
    if (m.pos_residual > 0.0) {
      std::ostringstream os;
      os << "nudge: move " << m.slot_name << " ~" << std::lround(m.pos_residual) << " px";
      events.push_back(os.str());
    }
    if (std::abs(m.theta_residual) >= 0.5) {
      std::ostringstream os;
      os << "nudge: rotate " << m.slot_name << " ~" << std::lround(std::abs(m.theta_residual)) << "°";
      events.push_back(os.str());
    }
  }
  for (const SlotRef& s : result.missing) events.push_back("part missing: " + s.slot_name);
  return events;
}

nlohmann::json to_json(const CompositionTemplate& tmpl) {
  nlohmann::json parts = nlohmann::json::array();
  for (const PartGroup& g : tmpl.parts) {
    nlohmann::json alts = nlohmann::json::array();
    for (const Alternative& alt : g.alternatives) {
      nlohmann::json slots = nlohmann::json::array();
      for (const PartSlot& s : alt) {
        slots.push_back({{"name", s.name},
                         {"shape", std::string(to_string(s.shape))},
                         {"spec_id", s.spec_id ? nlohmann::json(*s.spec_id) : nlohmann::json(nullptr)},
                         {"cx", s.cx},
                         {"cy", s.cy},
                         {"theta_deg", s.theta_deg}});
      }
      alts.push_back(std::move(slots));
    }
    parts.push_back({{"name", g.name}, {"alternatives", std::move(alts)}});
  }
  return {{"id", tmpl.id}, {"parts", std::move(parts)}};
}

CompositionTemplate template_from_json(const nlohmann::json& j) {
  namespace ju = json_util;
  ju::require_object(j, "");
  ju::reject_unknown(j, "", {"id", "parts"});
  CompositionTemplate t;
  t.id = ju::string(j, "", "id");
  const auto& parts = ju::array(j, "", "parts");
  for (std::size_t g = 0; g < parts.size(); ++g) {
    const std::string gpath = ju::index("parts", g);
    const auto& pj = parts[g];
    ju::require_object(pj, gpath);
    ju::reject_unknown(pj, gpath, {"name", "alternatives"});
    PartGroup group;
    if (pj.contains("name")) group.name = ju::string(pj, gpath, "name");
    const auto& alts = ju::array(pj, gpath, "alternatives");
    for (std::size_t a = 0; a < alts.size(); ++a) {
      const std::string apath = ju::join(gpath, "alternatives") + "[" + std::to_string(a) + "]";
      if (!alts[a].is_array()) throw SchemaError(apath, "expected an array of slots");
      Alternative alt;
      for (std::size_t s = 0; s < alts[a].size(); ++s) {
        const std::string spath = ju::index(apath, s);
        const auto& sj = alts[a][s];
        ju::require_object(sj, spath);
        ju::reject_unknown(sj, spath, {"name", "shape", "spec_id", "cx", "cy", "theta_deg"});
        PartSlot slot;
        if (sj.contains("name")) slot.name = ju::string(sj, spath, "name");
        const std::string shape = ju::string(sj, spath, "shape");
        try {
          slot.shape = shape_from_string(shape);
        } catch (const std::invalid_argument&) {
          throw SchemaError(ju::join(spath, "shape"), "unknown shape '" + shape + "'");
        }
        if (sj.contains("spec_id") && !sj["spec_id"].is_null()) slot.spec_id = ju::string(sj, spath, "spec_id");
        slot.cx = ju::number(sj, spath, "cx");
        slot.cy = ju::number(sj, spath, "cy");
        slot.theta_deg = ju::number(sj, spath, "theta_deg");
        alt.push_back(std::move(slot));
      }
      group.alternatives.push_back(std::move(alt));
    }
    t.parts.push_back(std::move(group));
  }
  return t;
}

nlohmann::json to_json(const CompositionResult& r) {
  auto match_json = [](const SlotMatch& m) {
    return nlohmann::json{{"group", m.group},
                          {"slot", m.slot},
                          {"slot_name", m.slot_name},
                          {"detection", m.detection},
                          {"pos_residual", m.pos_residual},
                          {"theta_residual", m.theta_residual}};
  };
  nlohmann::json matched = nlohmann::json::array();
  nlohmann::json misplaced = nlohmann::json::array();
  nlohmann::json missing = nlohmann::json::array();
  for (const SlotMatch& m : r.matched) matched.push_back(match_json(m));
  for (const SlotMatch& m : r.misplaced) misplaced.push_back(match_json(m));
  for (const SlotRef& s : r.missing) {
    missing.push_back({{"group", s.group},
                       {"slot", s.slot},
                       {"slot_name", s.slot_name},
                       {"shape", std::string(to_string(s.shape))}});
  }
  return {{"template_id", r.template_id},
          {"complete", r.complete},
          {"chosen_alternatives", r.chosen_alternatives},
          {"matched", std::move(matched)},
          {"missing", std::move(missing)},
          {"misplaced", std::move(misplaced)},
          {"extra", r.extra},
          {"transform",
           {{"rotation_deg", r.transform.rotation_deg}, {"tx", r.transform.tx}, {"ty", r.transform.ty}}}};
}

}  // namespace tilesense::compose
