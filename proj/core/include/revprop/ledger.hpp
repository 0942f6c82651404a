#pragma once

#include <atomic>
#include <cstdint>
#include <memory>

namespace revprop {

/// What a tensor's elements are charged to.
///
/// Activations (forward values, activation gradients, local graph buffers)
/// count toward live/peak. Parameters, parameter gradients and optimizer
/// moments are tracked separately. Dataset storage is not tracked at all.
enum class MemoryKind : std::uint8_t { activation, parameter, untracked };

/// Point-in-time copy of a ledger's counters.
struct MemoryLedger {
  std::int64_t live_elements = 0;
  std::int64_t peak_elements = 0;
  std::int64_t fwd_op_count = 0;
  std::int64_t bwd_op_count = 0;
  std::int64_t parameter_elements = 0;
};

/// Shared counter set. Every mutation is an atomic RMW; updates propagate to
/// the parent chain so the root ledger always sees every allocation.
class Ledger {
 public:
  explicit Ledger(std::shared_ptr<Ledger> parent = nullptr);

  Ledger(const Ledger&) = delete;
  Ledger& operator=(const Ledger&) = delete;

  void allocate(MemoryKind kind, std::int64_t elements) noexcept;
  void release(MemoryKind kind, std::int64_t elements) noexcept;
  void count_forward_op() noexcept;
  void count_backward_op() noexcept;

  /// Drops peak back to the current live count and zeroes op counters.
  void reset_peak_and_ops() noexcept;

  [[nodiscard]] MemoryLedger snapshot() const noexcept;

 private:
  std::shared_ptr<Ledger> parent_;
  std::atomic<std::int64_t> live_{0};
  std::atomic<std::int64_t> peak_{0};
  std::atomic<std::int64_t> fwd_ops_{0};
  std::atomic<std::int64_t> bwd_ops_{0};
  std::atomic<std::int64_t> params_{0};
};

/// Process-wide root ledger.
const std::shared_ptr<Ledger>& root_ledger();

/// Ledger that allocations on the calling thread are charged to.
const std::shared_ptr<Ledger>& current_ledger();

/// Snapshot of the root ledger.
MemoryLedger ledger_snapshot();

/// RAII scope: while alive, allocations and op counts on this thread go to a
/// fresh child ledger (and still propagate to every enclosing ledger).
/// Concurrent steps on different threads each open their own scope.
class LedgerScope {
 public:
  LedgerScope();
  ~LedgerScope();

  LedgerScope(const LedgerScope&) = delete;
  LedgerScope& operator=(const LedgerScope&) = delete;

  [[nodiscard]] MemoryLedger snapshot() const noexcept { return ledger_->snapshot(); }
  [[nodiscard]] Ledger& ledger() noexcept { return *ledger_; }

 private:
  std::shared_ptr<Ledger> ledger_;
  std::shared_ptr<Ledger> previous_;
};

}  // namespace revprop
