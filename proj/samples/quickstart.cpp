// Trains a small model on synthetic data for a few hundred steps and reports
// held-out verification and identification metrics.

#include <iostream>

#include "pfcpgan/pfcpgan.hpp"

int main(int argc, char** argv) {
  using namespace pfcpgan;
  tune_allocator();

  RunConfig rc;
  rc.data.n_subjects = 20;
  rc.model.base_channels = 4;
  rc.train.batch_size = 32;
  rc.train.max_steps = argc > 1 ? std::stoll(argv[1]) : 200;
  rc.train.log_every = 50;
  rc.eval.folds.n_folds = 4;
  rc.sync();
  rc.validate();

  const Dataset data = generate_synthetic_dataset(rc.data);
  const HoldoutSplit split = make_holdout_split(data, rc.eval);

  TrainOptions opts;
  opts.on_log = [](const TrainLogRecord& r) {
    std::cout << "step " << r.step << "  l_cpl " << r.losses.l_cpl << "  total " << r.losses.total << "\n";
  };
  const TrainResult<float> result = train<float>(split.train, rc.model, rc.train, opts);

  const EvalReport before = evaluate_fold(init_model<float>(rc.model, rc.train.seed), data, split.fold, rc.eval);
  const EvalReport after = evaluate_fold(result.state, data, split.fold, rc.eval);
  std::cout << "held-out EER  " << before.eer << " -> " << after.eer << "\n";
  std::cout << "held-out rank-1 " << before.rank_k.at(1) << " -> " << after.rank_k.at(1) << "\n";
}
