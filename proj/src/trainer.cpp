#include "lidarfcn/trainer.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdio>

namespace lfcn {

void AugmentConfig::validate() const {
  if (!(max_rotation >= 0.0) || !(max_translation_xy >= 0.0) || !(max_translation_z >= 0.0)) {
    throw ConfigError("augmentation ranges must be >= 0");
  }
}

TrainingSample transform_sample(const TrainingSample& sample, double angle, const Point3& translation) {
  const RigidTransform t = RigidTransform::rot_z(angle, translation);
  TrainingSample out;
  out.id = sample.id;
  out.scan = apply_rigid_transform(sample.scan, t);
  out.boxes = sample.boxes;
  for (auto& b : out.boxes) {
    b.box.center = t.apply(b.box.center);
    b.box.yaw = normalize_angle(b.box.yaw + angle);
  }
  return out;
}

TrainingSample augment(const TrainingSample& sample, const AugmentConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  auto draw = [&rng](double range) {
    return range > 0.0 ? std::uniform_real_distribution<double>(-range, range)(rng) : 0.0;
  };
  const double angle = draw(cfg.max_rotation);
  const double tx = draw(cfg.max_translation_xy);
  const double ty = draw(cfg.max_translation_xy);
  const double tz = draw(cfg.max_translation_z);
  if (angle == 0.0 && tx == 0.0 && ty == 0.0 && tz == 0.0) return sample;
  return transform_sample(sample, angle, Point3(tx, ty, tz));
}

void TrainConfig::validate() const {
  projection.validate();
  augment.validate();
  if (iterations < 0) throw ConfigError("iterations must be >= 0");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (!(lr_decay > 0.0) || lr_step < 0) throw ConfigError("bad learning-rate decay");
  if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be >= 0");
  if (!(label_margin >= 0.0)) throw ConfigError("label margin must be >= 0");
  if (!(divergence_threshold > 0.0)) throw ConfigError("divergence threshold must be > 0");
}

double TrainConfig::learning_rate_at(int iteration) const {
  if (lr_step <= 0) return learning_rate;
  return learning_rate * std::pow(lr_decay, double(iteration / lr_step));
}

double mean_vehicle_points(const std::vector<TrainingSample>& data, const ProjectionConfig& proj,
                           double margin) {
  double total = 0.0;
  std::size_t vehicles = 0;
  for (const auto& s : data) {
    if (s.scan.empty()) continue;
    const PointMap map = project_scan(s.scan, proj);
    const LabelMap labels = build_labels(s.scan, s.boxes, map, margin);
    for (std::size_t b = 0; b < s.boxes.size(); ++b) {
      if (s.boxes[b].cls != BoxClass::Vehicle || labels.points_per_box[b] == 0) continue;
      total += labels.points_per_box[b];
      ++vehicles;
    }
  }
  if (vehicles == 0) throw DataError("no vehicle points in the training set");
  return total / double(vehicles);
}

Box3D away_heading(const Box3D& box) {
  Box3D out = box;
  const double toward = std::cos(box.yaw) * box.center.x() + std::sin(box.yaw) * box.center.y();
  if (toward < 0.0) out.yaw = normalize_angle(box.yaw + kPi);
  return out;
}

PreparedSample prepare_sample(const TrainingSample& sample, const TrainConfig& cfg) {
  PreparedSample p;
  p.map = project_scan(sample.scan, cfg.projection);
  if (cfg.canonical_heading) {
    std::vector<LabeledBox> boxes = sample.boxes;
    for (auto& b : boxes) b.box = away_heading(b.box);
    p.labels = build_labels(sample.scan, boxes, p.map, cfg.label_margin);
  } else {
    p.labels = build_labels(sample.scan, sample.boxes, p.map, cfg.label_margin);
  }
  const std::size_t n = p.labels.num_points();
  if (n > 0 && n == p.labels.num_vehicle_points()) {
    p.usable = false;
    return p;
  }
  p.weights = sample_weights(p.labels, cfg.loss);
  p.input = encode_input(p.map, cfg.input);
  return p;
}

double objectness_accuracy(const Tensor<float>& objectness, const LabelMap& labels) {
  const std::size_t n = labels.size();
  std::size_t total = 0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const CellLabel& c = labels[i];
    if (!c.in_scan || c.ignore) continue;
    ++total;
    const int predicted = objectness[n + i] > objectness[i] ? 1 : 0;
    correct += predicted == c.label ? 1 : 0;
  }
  return total ? double(correct) / double(total) : 1.0;
}

namespace {

std::mt19937_64 iteration_rng(std::uint64_t seed, int iteration) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(iteration), 0x7452u};
  return std::mt19937_64(seq);
}

}  // namespace

void train(const std::vector<TrainingSample>& data, Network<float>& net, const TrainConfig& cfg,
           TrainState& state, const std::function<void(const IterationStats&)>& on_iteration) {
  cfg.validate();
  cfg.loss.validate();
  if (data.empty()) throw DataError("training needs at least one scan");
  net.spec().infer_shapes(cfg.projection.rows, cfg.projection.cols);

  SgdMomentum<float> opt(cfg.learning_rate, cfg.momentum);
  if (!state.velocity.empty()) opt.velocity() = state.velocity;

  for (int it = state.iteration; it < cfg.iterations; ++it) {
    std::mt19937_64 rng = iteration_rng(cfg.seed, it);
    const std::size_t index = std::uniform_int_distribution<std::size_t>(0, data.size() - 1)(rng);
    const TrainingSample sample = augment(data[index], cfg.augment, rng);
    if (sample.scan.empty()) continue;
    const PreparedSample p = prepare_sample(sample, cfg);
    if (!p.usable) {
      spdlog::warn("iteration {}: scan {} has no background points, skipped", it, sample.id);
      continue;
    }

    const ForwardCache<float> cache = net.forward(p.input);
    const HeadOutputs<float> heads = net.heads(cache);
    const LossResult<float> loss =
        total_loss(heads.objectness, heads.boxes, p.labels, p.weights, cfg.loss.w_box);
    if (!std::isfinite(loss.total) || loss.total > cfg.divergence_threshold) {
      throw NumericError("training diverged at iteration " + std::to_string(it) + " (scan " +
                         sample.id + "): loss " + std::to_string(loss.total) + " exceeds " +
                         std::to_string(cfg.divergence_threshold));
    }
    ParameterSet<float> grads = net.backward(cache, loss.d_objectness, loss.d_boxes);
    const double norm = global_norm(grads);
    if (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) {
      const float scale = static_cast<float>(cfg.clip_norm / norm);
      for (auto& g : grads) {
        for (auto& v : g.weight.storage()) v *= scale;
        for (auto& v : g.bias.storage()) v *= scale;
      }
    }
    opt.set_learning_rate(cfg.learning_rate_at(it));
    opt.step(net.params(), grads);

    state.iteration = it + 1;
    state.velocity = opt.velocity();
    if (on_iteration) {
      IterationStats s;
      s.iteration = it;
      s.sample = index;
      s.objectness = loss.objectness;
      s.box = loss.box;
      s.total = loss.total;
      s.grad_norm = norm;
      s.accuracy = objectness_accuracy(heads.objectness, p.labels);
      on_iteration(s);
    }
  }
  state.iteration = std::max(state.iteration, cfg.iterations);
}

std::string loss_log_header() { return "iteration,objectness_loss,box_loss,total"; }

std::string loss_log_row(const IterationStats& s) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g", s.iteration, s.objectness, s.box, s.total);
  return buf;
}

}  // namespace lfcn
