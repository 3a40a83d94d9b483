// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <list>
#include <memory>
#include <optional>
#include <vector>

namespace lorasim::sim {

/// Chooses which inactive resident to evict. The cache reports every
/// transition between active and inactive.
class EvictionPolicy {
public:
    virtual ~EvictionPolicy() = default;

    virtual void on_inactive(std::uint32_t adapter) = 0;
    virtual void on_active(std::uint32_t adapter) = 0;
    virtual void on_evict(std::uint32_t adapter) = 0;
    /// Next eviction candidate among inactive residents, without removing it.
    virtual std::optional<std::uint32_t> victim() const = 0;
};

/// Least recently released inactive resident goes first.
class LruPolicy final : public EvictionPolicy {
public:
    explicit LruPolicy(std::size_t adapters);

    void on_inactive(std::uint32_t adapter) override;
    void on_active(std::uint32_t adapter) override;
    void on_evict(std::uint32_t adapter) override;
    std::optional<std::uint32_t> victim() const override;

private:
    std::list<std::uint32_t> order_;  // front = least recently released
    std::vector<std::list<std::uint32_t>::iterator> pos_;
    std::vector<bool> listed_;
};

/// Fixed-capacity adapter cache with active reference counts. Active adapters
/// are never evicted.
class AdapterCache {
public:
    AdapterCache(std::size_t capacity, std::size_t adapters, std::unique_ptr<EvictionPolicy> policy = nullptr);

    enum class Probe { kResident, kLoadable, kFull };

    Probe probe(std::uint32_t adapter) const;

    struct Acquired {
        bool inserted = false;               ///< adapter was not resident before
        std::optional<std::uint32_t> evicted;
    };

    /// Takes one active reference, inserting (and evicting if needed) when the
    /// adapter is absent. Throws std::logic_error when probe() would say kFull.
    Acquired acquire(std::uint32_t adapter);

    /// Drops one active reference; the adapter stays resident.
    void release(std::uint32_t adapter);

    /// Inserts an inactive resident (used for warm starts).
    void preload(std::uint32_t adapter);

    bool resident(std::uint32_t adapter) const { return resident_.at(adapter); }
    std::uint32_t active_refs(std::uint32_t adapter) const { return refs_.at(adapter); }
    std::size_t size() const noexcept { return size_; }
    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t distinct_active() const noexcept { return distinct_active_; }

private:
    std::size_t capacity_;
    std::unique_ptr<EvictionPolicy> policy_;
    std::vector<bool> resident_;
    std::vector<std::uint32_t> refs_;
    std::size_t size_ = 0;
    std::size_t distinct_active_ = 0;
};

}  // namespace lorasim::sim
