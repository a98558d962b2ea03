#pragma once

#include <string>
#include <vector>

#include "pdc/dataset.hpp"
#include "pdc/eval.hpp"
#include "pdc/model.hpp"
#include "pdc/nn.hpp"
#include "pdc/rng.hpp"

namespace pdc {

struct TrainSetup {
  ModelConfig model;        // classes is filled from the split
  SgdConfig sgd;
  std::size_t batch_size = 16;
  long iterations = 1000;
  double train_frac = 0.7;
  std::uint64_t seed = 1;
};

// Drives training over an in-memory dataset. Batch composition is a pure
// function of (seed, iteration), which makes runs reproducible and lets an
// interrupted run resume mid-schedule.
class Trainer {
 public:
  Trainer(const Dataset& ds, TrainSetup setup)
      : ds_(ds),
        setup_(setup),
        split_(split_dataset(ds.items, setup.train_frac, setup.seed)),
        sgd_(setup.sgd) {
    if (ds.meta.img_h != setup.model.input_h || ds.meta.img_w != setup.model.input_w) {
      throw config_error("dataset extent " + std::to_string(ds.meta.img_h) + "x" +
                         std::to_string(ds.meta.img_w) + " does not match configured input " +
                         std::to_string(setup.model.input_h) + "x" +
                         std::to_string(setup.model.input_w));
    }
    setup_.model.classes = split_.train_ids.size();
    if (setup_.model.classes < 2) {
      throw config_error("training needs at least 2 train identities");
    }
    model_ = std::make_unique<PdcModel>(setup_.model);
  }

  Batch make_batch(long iteration) const {
    Rng rng(Rng::mix(Rng::mix(setup_.seed, 0xBA7C4ULL), static_cast<std::uint64_t>(iteration)));
    Batch batch;
    const std::size_t n = setup_.batch_size;
    batch.images = Tensor({n, 3, setup_.model.input_h, setup_.model.input_w});
    const bool need_maps = model_->flags().part_stream;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t pick = split_.train_items[rng.below(split_.train_items.size())];
      const DatasetItem& item = ds_.items[pick];
      detail::paste_sample(batch.images, i, item.image);
      if (need_maps) batch.maps.push_back(response_maps_for(item, ds_.meta));
      batch.labels.push_back(split_.label_of_train_id.at(item.identity));
    }
    return batch;
  }

  StepStats step(long iteration) { return model_->train_step(make_batch(iteration), sgd_, iteration); }

  PdcModel& model() { return *model_; }
  Sgd& sgd() { return sgd_; }
  const Split& split() const { return split_; }
  const TrainSetup& setup() const { return setup_; }

 private:
  const Dataset& ds_;
  TrainSetup setup_;
  Split split_;
  Sgd sgd_;
  std::unique_ptr<PdcModel> model_;
};

// Probe/gallery retrieval evaluation of a trained model under the split.
inline EvalReport evaluate_model(PdcModel& model, const Dataset& ds, const Split& split,
                                 bool exclude_same_camera = false) {
  const Tensor probe_feats = model.extract_features(ds, split.probe_items);
  const Tensor gallery_feats = model.extract_features(ds, split.gallery_items);
  std::vector<int> probe_ids, gallery_ids, probe_cams, gallery_cams;
  for (std::size_t i : split.probe_items) {
    probe_ids.push_back(ds.items[i].identity);
    probe_cams.push_back(ds.items[i].camera);
  }
  for (std::size_t i : split.gallery_items) {
    gallery_ids.push_back(ds.items[i].identity);
    gallery_cams.push_back(ds.items[i].camera);
  }
  DistanceMatrix m = distance_matrix(probe_feats, gallery_feats, probe_ids, gallery_ids);
  m.probe_cams = std::move(probe_cams);
  m.gallery_cams = std::move(gallery_cams);
  m.exclude_same_camera = exclude_same_camera;
  return evaluate(m);
}

}  // namespace pdc
