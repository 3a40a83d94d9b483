// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#include "lorasim/cache.hpp"

#include <stdexcept>

namespace lorasim::sim {

LruPolicy::LruPolicy(std::size_t adapters) : pos_(adapters), listed_(adapters, false) {}

void LruPolicy::on_inactive(std::uint32_t adapter) {
    if (listed_.at(adapter)) order_.erase(pos_[adapter]);
    pos_[adapter] = order_.insert(order_.end(), adapter);
    listed_[adapter] = true;
}

void LruPolicy::on_active(std::uint32_t adapter) {
    if (!listed_.at(adapter)) return;
    order_.erase(pos_[adapter]);
    listed_[adapter] = false;
}

void LruPolicy::on_evict(std::uint32_t adapter) { on_active(adapter); }

std::optional<std::uint32_t> LruPolicy::victim() const {
    if (order_.empty()) return std::nullopt;
    return order_.front();
}

AdapterCache::AdapterCache(std::size_t capacity, std::size_t adapters, std::unique_ptr<EvictionPolicy> policy)
    : capacity_(capacity), policy_(std::move(policy)), resident_(adapters, false), refs_(adapters, 0) {
    if (capacity == 0) throw std::invalid_argument("cache capacity must be at least 1");
    if (!policy_) policy_ = std::make_unique<LruPolicy>(adapters);
}

AdapterCache::Probe AdapterCache::probe(std::uint32_t adapter) const {
    if (resident_.at(adapter)) return Probe::kResident;
    if (size_ < capacity_ || policy_->victim()) return Probe::kLoadable;
    return Probe::kFull;
}

AdapterCache::Acquired AdapterCache::acquire(std::uint32_t adapter) {
    Acquired out;
    if (!resident_.at(adapter)) {
        if (size_ == capacity_) {
            const auto v = policy_->victim();
            if (!v) throw std::logic_error("no evictable adapter");
            if (refs_[*v] != 0) throw std::logic_error("eviction policy chose an active adapter");
            policy_->on_evict(*v);
            resident_[*v] = false;
            --size_;
            out.evicted = v;
        }
        resident_[adapter] = true;
        ++size_;
        out.inserted = true;
    }
    if (refs_[adapter]++ == 0) {
        ++distinct_active_;
        policy_->on_active(adapter);
    }
    return out;
}

void AdapterCache::release(std::uint32_t adapter) {
    if (refs_.at(adapter) == 0) throw std::logic_error("release of an inactive adapter");
    if (--refs_[adapter] == 0) {
        --distinct_active_;
        policy_->on_inactive(adapter);
    }
}

void AdapterCache::preload(std::uint32_t adapter) {
    if (resident_.at(adapter)) return;
    if (size_ == capacity_) throw std::logic_error("preload beyond cache capacity");
    resident_[adapter] = true;
    ++size_;
    policy_->on_inactive(adapter);
}

}  // namespace lorasim::sim
