#include "revprop/ledger.hpp"

#include <utility>

namespace revprop {

namespace {

void raise_to(std::atomic<std::int64_t>& peak, std::int64_t value) noexcept {
  std::int64_t seen = peak.load(std::memory_order_relaxed);
  while (seen < value && !peak.compare_exchange_weak(seen, value, std::memory_order_relaxed)) {
  }
}

thread_local std::shared_ptr<Ledger> t_current;

}  // namespace

Ledger::Ledger(std::shared_ptr<Ledger> parent) : parent_(std::move(parent)) {}

void Ledger::allocate(MemoryKind kind, std::int64_t elements) noexcept {
  switch (kind) {
    case MemoryKind::activation: {
      const auto now = live_.fetch_add(elements, std::memory_order_relaxed) + elements;
      raise_to(peak_, now);
      break;
    }
    case MemoryKind::parameter:
      params_.fetch_add(elements, std::memory_order_relaxed);
      break;
    case MemoryKind::untracked:
      return;
  }
  if (parent_) parent_->allocate(kind, elements);
}

void Ledger::release(MemoryKind kind, std::int64_t elements) noexcept {
  switch (kind) {
    case MemoryKind::activation:
      live_.fetch_sub(elements, std::memory_order_relaxed);
      break;
    case MemoryKind::parameter:
      params_.fetch_sub(elements, std::memory_order_relaxed);
      break;
    case MemoryKind::untracked:
      return;
  }
  if (parent_) parent_->release(kind, elements);
}

void Ledger::count_forward_op() noexcept {
  fwd_ops_.fetch_add(1, std::memory_order_relaxed);
  if (parent_) parent_->count_forward_op();
}

void Ledger::count_backward_op() noexcept {
  bwd_ops_.fetch_add(1, std::memory_order_relaxed);
  if (parent_) parent_->count_backward_op();
}

void Ledger::reset_peak_and_ops() noexcept {
  peak_.store(live_.load(std::memory_order_relaxed), std::memory_order_relaxed);
  fwd_ops_.store(0, std::memory_order_relaxed);
  bwd_ops_.store(0, std::memory_order_relaxed);
}

MemoryLedger Ledger::snapshot() const noexcept {
  MemoryLedger s;
  s.live_elements = live_.load(std::memory_order_relaxed);
  s.peak_elements = peak_.load(std::memory_order_relaxed);
  s.fwd_op_count = fwd_ops_.load(std::memory_order_relaxed);
  s.bwd_op_count = bwd_ops_.load(std::memory_order_relaxed);
  s.parameter_elements = params_.load(std::memory_order_relaxed);
  if (s.peak_elements < s.live_elements) s.peak_elements = s.live_elements;
  return s;
}

const std::shared_ptr<Ledger>& root_ledger() {
  static const std::shared_ptr<Ledger> root = std::make_shared<Ledger>();
  return root;
}

const std::shared_ptr<Ledger>& current_ledger() {
  if (!t_current) t_current = root_ledger();
  return t_current;
}

MemoryLedger ledger_snapshot() { return root_ledger()->snapshot(); }

LedgerScope::LedgerScope()
    : ledger_(std::make_shared<Ledger>(current_ledger())), previous_(current_ledger()) {
  t_current = ledger_;
}

LedgerScope::~LedgerScope() { t_current = previous_; }

}  // namespace revprop
