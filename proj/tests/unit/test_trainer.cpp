#include <gtest/gtest.h>

#include <cmath>

#include "json.hpp"
#include "revprop/error.hpp"
#include "revprop/trainer.hpp"
#include "support/random.hpp"
#include "support/toy_data.hpp"

namespace revprop {
namespace {

using testing::toy_spec;

const testing::ToySplit<double>& toy_split() {
  static const auto split = testing::make_toy_split<double>(testing::ToyData{});
  return split;
}

ProtocolConfig quick_protocol(std::size_t epochs) {
  ProtocolConfig c;
  c.learning_rate = 1e-3;
  c.max_epochs = epochs;
  c.batch_size = 8;
  return c;
}

TEST(Protocol, ValidationRejectsBadValues) {
  EXPECT_NO_THROW(ProtocolConfig{}.validate());
  auto bad = [](auto mutate) {
    ProtocolConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), ConfigError);
  };
  bad([](ProtocolConfig& c) { c.learning_rate = 0.0; });
  bad([](ProtocolConfig& c) { c.lr_decay = 1.5; });
  bad([](ProtocolConfig& c) { c.lr_plateau = 0; });
  bad([](ProtocolConfig& c) { c.lr_floor = -1.0; });
  bad([](ProtocolConfig& c) { c.patience = 0; });
  bad([](ProtocolConfig& c) { c.max_epochs = 0; });
  bad([](ProtocolConfig& c) { c.batch_size = 0; });
}

TEST(Train, EmptySetsRejected) {
  const auto& d = toy_split();
  EXPECT_THROW(train<double>(toy_spec(1), {}, d.validation, quick_protocol(1), 1), ConfigError);
  EXPECT_THROW(train<double>(toy_spec(1), d.training, {}, quick_protocol(1), 1), ConfigError);
}

TEST(Train, LossDecreasesAndRecordIsComplete) {
  const auto& d = toy_split();
  auto r = train<double>(toy_spec(1), d.training, d.validation, quick_protocol(6), 3);
  ASSERT_EQ(r.record.epochs.size(), 6u);
  EXPECT_EQ(r.record.stop_reason, "max_epochs");
  EXPECT_EQ(r.record.seed, 3u);
  EXPECT_EQ(r.record.backprop, "efficient");
  EXPECT_LT(r.record.epochs.back().train_loss, r.record.epochs.front().train_loss);
  EXPECT_GE(r.record.best_epoch, 1u);
  EXPECT_EQ(r.record.best_val_rmse, r.record.epochs[r.record.best_epoch - 1].val_rmse);
  for (const auto& e : r.record.epochs) EXPECT_LE(r.record.best_val_rmse, e.val_rmse);
  EXPECT_EQ(validation_rmse(r.best_params, toy_spec(1), d.validation), r.record.best_val_rmse);
}

TEST(Train, DeterministicAcrossRunsAndThreadCounts) {
  const auto& d = toy_split();
  auto c = quick_protocol(2);
  auto a = train<double>(toy_spec(1), d.training, d.validation, c, 5);
  c.threads = 1;
  auto b = train<double>(toy_spec(1), d.training, d.validation, c, 5);
  EXPECT_EQ(epochs_jsonl(a.record), epochs_jsonl(b.record));
  auto ra = kernel_registry(a.best_params), rb = kernel_registry(b.best_params);
  for (std::size_t i = 0; i < ra.size(); ++i) EXPECT_TRUE(identical(ra[i].second->weights, rb[i].second->weights));
}

TEST(Train, NaiveAndEfficientTrajectoriesAgree) {
  const auto& d = toy_split();
  auto c = quick_protocol(3);
  auto e = train<double>(toy_spec(2), d.training, d.validation, c, 7);
  c.backprop = BackpropMode::naive;
  auto n = train<double>(toy_spec(2), d.training, d.validation, c, 7);
  ASSERT_EQ(e.record.epochs.size(), n.record.epochs.size());
  EXPECT_EQ(n.record.backprop, "naive");
  for (std::size_t i = 0; i < e.record.epochs.size(); ++i) {
    EXPECT_NEAR(e.record.epochs[i].val_rmse, n.record.epochs[i].val_rmse, 1e-3 * n.record.epochs[i].val_rmse);
    EXPECT_NEAR(e.record.epochs[i].train_loss, n.record.epochs[i].train_loss, 1e-3 * n.record.epochs[i].train_loss);
  }
}

TEST(Train, PlateauDecayAndPatience) {
  // A vanishing learning rate leaves validation RMSE unchanged after epoch 1.
  const auto& d = toy_split();
  auto c = quick_protocol(20);
  c.learning_rate = 1e-300;
  c.lr_plateau = 2;
  c.patience = 4;
  c.lr_decay = 0.5;
  c.lr_floor = 0.0;
  auto r = train<double>(toy_spec(1), d.training, d.validation, c, 1);
  EXPECT_EQ(r.record.stop_reason, "patience");
  ASSERT_EQ(r.record.epochs.size(), 5u);
  EXPECT_EQ(r.record.best_epoch, 1u);
  EXPECT_EQ(r.record.epochs[2].learning_rate, 1e-300);
  EXPECT_EQ(r.record.epochs[3].learning_rate, 0.5e-300);
  c.lr_floor = 0.8e-300;
  r = train<double>(toy_spec(1), d.training, d.validation, c, 1);
  EXPECT_EQ(r.record.epochs[3].learning_rate, 0.8e-300);
}

TEST(Train, DivergenceEndsRunWithDiagnostic) {
  auto d = testing::make_toy_split<float>(testing::ToyData{});
  auto c = quick_protocol(3);
  c.learning_rate = 1e30;
  auto r = train<float>(toy_spec(1), d.training, d.validation, c, 1);
  EXPECT_TRUE(r.record.diverged());
  EXPECT_FALSE(r.record.diagnostic.empty());
  auto j = nlohmann::json::parse(summary_json(r.record));
  EXPECT_EQ(j["stop_reason"], "diverged");
}

TEST(MultiSeed, SelectsLowestBestValidation) {
  const auto& d = toy_split();
  auto m = train_multi_seed<double>(toy_spec(1), d.training, d.validation, quick_protocol(2), 10, 3);
  ASSERT_EQ(m.records.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(m.records[i].seed, 10u + i);
    EXPECT_LE(m.records[m.selected].best_val_rmse, m.records[i].best_val_rmse);
  }
  EXPECT_EQ(validation_rmse(m.best_params, toy_spec(1), d.validation), m.records[m.selected].best_val_rmse);
  EXPECT_THROW(train_multi_seed<double>(toy_spec(1), d.training, d.validation, quick_protocol(1), 1, 0), ConfigError);
}

TEST(Serialization, EpochLinesOmitWallTime) {
  TrainRunRecord r;
  r.seed = 4;
  r.backprop = "naive";
  r.epochs.push_back({1, 0.5, 0.25, 1e-4, 123.0});
  r.stop_reason = "max_epochs";
  r.best_epoch = 1;
  r.best_val_rmse = 0.25;
  EXPECT_EQ(epochs_jsonl(r), "{\"epoch\":1,\"train_loss\":0.5,\"val_rmse\":0.25,\"lr\":0.0001}\n");
  EXPECT_EQ(timings_jsonl(r), "{\"epoch\":1,\"wall_time_ms\":123.0}\n");
  auto j = nlohmann::json::parse(summary_json(r));
  EXPECT_EQ(j["seed"], 4);
  EXPECT_EQ(j["best_val_rmse"], 0.25);
  EXPECT_FALSE(j.contains("diagnostic"));
}

}  // namespace
}  // namespace revprop
