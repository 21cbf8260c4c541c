#include "duogate/core.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "duogate/rng.hpp"
#include "json.hpp"

namespace duogate {

using ordered_json = nlohmann::ordered_json;

std::string role_kind_name(RoleKind kind) {
  switch (kind) {
    case RoleKind::BenignIndependent: return "benign_independent";
    case RoleKind::BenignFragment: return "benign_fragment";
    case RoleKind::MaliciousFragment: return "malicious_fragment";
    case RoleKind::MaliciousAnchor: return "malicious_anchor";
  }
  throw std::logic_error("bad role kind");
}

RoleKind role_kind_from_name(const std::string& name) {
  if (name == "benign_independent") return RoleKind::BenignIndependent;
  if (name == "benign_fragment") return RoleKind::BenignFragment;
  if (name == "malicious_fragment") return RoleKind::MaliciousFragment;
  if (name == "malicious_anchor") return RoleKind::MaliciousAnchor;
  throw std::invalid_argument("unknown role: " + name);
}

std::string decision_name(Decision d) { return d == Decision::Allow ? "allow" : "block"; }

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::EmptyHistory: return "empty_history";
    case Stage::Inherited: return "inherited";
    case Stage::IntentBlocked: return "intent_blocked";
    case Stage::IntentPassed: return "intent_passed";
  }
  throw std::logic_error("bad stage");
}

void Thresholds::validate() const {
  if (!(tau_sem > 0.0 && tau_sem < 1.0)) throw std::invalid_argument("tau_sem outside (0,1)");
  if (!(tau_int > 0.0 && tau_int < 1.0)) throw std::invalid_argument("tau_int outside (0,1)");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
}

std::vector<std::int64_t> IntentDataset::malicious_intent_ids() const {
  std::vector<std::int64_t> ids;
  std::set<std::int64_t> seen;
  for (const auto& s : samples) {
    if (s.role.malicious() && seen.insert(s.role.intent_id).second) ids.push_back(s.role.intent_id);
  }
  return ids;
}

std::vector<std::int64_t> IntentDataset::benign_intent_ids() const {
  std::vector<std::int64_t> ids;
  std::set<std::int64_t> seen;
  for (const auto& s : samples) {
    if (s.role.kind == RoleKind::BenignFragment && seen.insert(s.role.intent_id).second)
      ids.push_back(s.role.intent_id);
  }
  return ids;
}

std::vector<std::size_t> IntentDataset::fragment_indices(std::int64_t intent_id) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& r = samples[i].role;
    if (r.intent_id == intent_id &&
        (r.kind == RoleKind::MaliciousFragment || r.kind == RoleKind::BenignFragment))
      out.push_back(i);
  }
  return out;
}

std::optional<std::size_t> IntentDataset::anchor_index(std::int64_t intent_id) const {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& r = samples[i].role;
    if (r.kind == RoleKind::MaliciousAnchor && r.intent_id == intent_id) return i;
  }
  return std::nullopt;
}

namespace {

// Re-place each intent's fragments at their assigned stream slots in dataset
// order, so within-intent order survives any slot assignment.
void restore_intent_order(const IntentDataset& dataset, const std::vector<std::size_t>& eligible,
                          std::vector<std::size_t>& order) {
  std::map<std::int64_t, std::vector<std::size_t>> slots;   // intent -> positions in stream
  std::map<std::int64_t, std::vector<std::size_t>> members;  // intent -> eligible-list indices
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const Role& r = dataset.samples[eligible[order[pos]]].role;
    if (r.has_intent()) slots[r.intent_id].push_back(pos);
  }
  for (std::size_t e = 0; e < eligible.size(); ++e) {
    const Role& r = dataset.samples[eligible[e]].role;
    if (r.has_intent()) members[r.intent_id].push_back(e);
  }
  for (auto& [intent, positions] : slots) {
    const auto& mem = members[intent];
    for (std::size_t j = 0; j < positions.size(); ++j) order[positions[j]] = mem[j];
  }
}

std::vector<std::size_t> slow_loris_order(const IntentDataset& dataset,
                                          const std::vector<std::size_t>& eligible,
                                          const InterleavePolicy& policy, Rng& rng) {
  const std::size_t total = eligible.size();
  std::vector<bool> is_malicious(total, false);
  std::map<std::int64_t, std::vector<std::size_t>> mal_members;  // intent -> eligible idx
  for (std::size_t e = 0; e < total; ++e) {
    const Role& r = dataset.samples[eligible[e]].role;
    if (r.kind == RoleKind::MaliciousFragment) {
      is_malicious[e] = true;
      mal_members[r.intent_id].push_back(e);
    }
  }

  std::vector<std::size_t> order(total, static_cast<std::size_t>(-1));
  std::vector<bool> occupied(total, false);
  auto probe_free = [&](long target) {
    for (long delta = 0;; ++delta) {
      long fwd = target + delta;
      if (fwd >= 0 && fwd < static_cast<long>(total) && !occupied[fwd]) return fwd;
      long bwd = target - delta;
      if (delta > 0 && bwd >= 0 && bwd < static_cast<long>(total) && !occupied[bwd]) return bwd;
      if (fwd >= static_cast<long>(total) && bwd < 0) throw std::logic_error("no free slot");
    }
  };

  for (auto& [intent, members] : mal_members) {
    const std::size_t n = members.size();
    double gap;  // distance between consecutive fragment positions
    if (n <= 1) {
      gap = 0.0;
    } else {
      gap = static_cast<double>(total - 1) / static_cast<double>(n - 1);
      double cap = static_cast<double>(policy.max_spread) + 1.0;
      if (cap > 0 && gap > cap) gap = cap;
    }
    for (std::size_t j = 0; j < n; ++j) {
      long target = (n == 1) ? static_cast<long>(total / 2)
                             : static_cast<long>(std::llround(static_cast<double>(j) * gap));
      long pos = probe_free(target);
      occupied[pos] = true;
      order[pos] = members[j];
    }
  }

  std::vector<std::size_t> background;
  for (std::size_t e = 0; e < total; ++e)
    if (!is_malicious[e]) background.push_back(e);
  rng.shuffle(background);
  std::size_t bi = 0;
  for (std::size_t pos = 0; pos < total; ++pos)
    if (!occupied[pos]) order[pos] = background[bi++];
  return order;
}

void check_schedule_order(const IntentDataset& dataset, const std::vector<std::size_t>& eligible,
                          const std::vector<std::size_t>& order) {
  std::map<std::int64_t, std::size_t> last_rank;
  std::map<std::int64_t, bool> seen;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const Role& r = dataset.samples[eligible[order[pos]]].role;
    if (!r.has_intent()) continue;
    if (seen[r.intent_id] && order[pos] < last_rank[r.intent_id])
      throw std::invalid_argument("schedule violates fragment order");
    last_rank[r.intent_id] = order[pos];
    seen[r.intent_id] = true;
  }
}

}  // namespace

std::vector<Request> make_stream(const IntentDataset& dataset, const InterleavePolicy& policy,
                                 std::uint64_t seed) {
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i)
    if (dataset.samples[i].role.kind != RoleKind::MaliciousAnchor) eligible.push_back(i);
  if (eligible.empty()) throw std::invalid_argument("empty stream source");

  Rng rng(seed);
  std::vector<std::size_t> order(eligible.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  switch (policy.kind) {
    case InterleavePolicy::Kind::UniformShuffle:
      rng.shuffle(order);
      if (!policy.shuffle_within_intent) restore_intent_order(dataset, eligible, order);
      break;
    case InterleavePolicy::Kind::SlowLoris:
      order = slow_loris_order(dataset, eligible, policy, rng);
      if (policy.shuffle_within_intent) {
        // keep the slot layout, shuffle which fragment lands on which slot
        restore_intent_order(dataset, eligible, order);
        std::map<std::int64_t, std::vector<std::size_t>> positions;
        for (std::size_t pos = 0; pos < order.size(); ++pos) {
          const Role& r = dataset.samples[eligible[order[pos]]].role;
          if (r.has_intent()) positions[r.intent_id].push_back(pos);
        }
        for (auto& [intent, slots] : positions) {
          std::vector<std::size_t> vals;
          for (auto p : slots) vals.push_back(order[p]);
          rng.shuffle(vals);
          for (std::size_t j = 0; j < slots.size(); ++j) order[slots[j]] = vals[j];
        }
      } else {
        restore_intent_order(dataset, eligible, order);
      }
      break;
    case InterleavePolicy::Kind::Adversarial: {
      if (policy.schedule.size() != eligible.size())
        throw std::invalid_argument("schedule size mismatch");
      std::vector<bool> used(eligible.size(), false);
      for (std::size_t v : policy.schedule) {
        if (v >= eligible.size() || used[v]) throw std::invalid_argument("schedule not a permutation");
        used[v] = true;
      }
      order = policy.schedule;
      if (!policy.shuffle_within_intent) check_schedule_order(dataset, eligible, order);
      break;
    }
  }

  std::vector<Request> stream;
  stream.reserve(order.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const Sample& s = dataset.samples[eligible[order[pos]]];
    Request r;
    r.id = static_cast<std::int64_t>(pos + 1);
    r.text = s.text;
    r.role = s.role;
    r.arrival_index = static_cast<std::int64_t>(pos + 1);
    stream.push_back(std::move(r));
  }
  return stream;
}

std::string request_to_line(const Request& r) {
  ordered_json j;
  j["id"] = r.id;
  j["text"] = r.text;
  j["role"] = role_kind_name(r.role.kind);
  if (r.role.has_intent()) j["intent_id"] = r.role.intent_id;
  j["arrival_index"] = r.arrival_index;
  return j.dump();
}

Request request_from_line(const std::string& line) {
  ordered_json j = ordered_json::parse(line);
  Request r;
  r.id = j.at("id").get<std::int64_t>();
  r.text = j.at("text").get<std::string>();
  r.role.kind = role_kind_from_name(j.at("role").get<std::string>());
  if (j.contains("intent_id")) r.role.intent_id = j.at("intent_id").get<std::int64_t>();
  if (r.role.has_intent() && r.role.intent_id < 0)
    throw std::invalid_argument("missing intent_id for role " + role_kind_name(r.role.kind));
  r.arrival_index = j.at("arrival_index").get<std::int64_t>();
  return r;
}

std::string stream_to_text(const std::vector<Request>& stream) {
  std::string out;
  for (const auto& r : stream) {
    out += request_to_line(r);
    out += '\n';
  }
  return out;
}

std::vector<Request> stream_from_text(const std::string& text) {
  std::vector<Request> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    out.push_back(request_from_line(line));
  }
  return out;
}

std::string dataset_to_text(const IntentDataset& ds) {
  ordered_json header;
  header["format"] = "duogate-dataset";
  header["version"] = 1;
  header["split"] = ds.split;
  header["synth"] = ds.synth_blob;
  std::string out = header.dump();
  out += '\n';
  for (const auto& s : ds.samples) {
    ordered_json j;
    j["text"] = s.text;
    j["role"] = role_kind_name(s.role.kind);
    if (s.role.has_intent()) j["intent_id"] = s.role.intent_id;
    out += j.dump();
    out += '\n';
  }
  return out;
}

IntentDataset dataset_from_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("empty dataset file");
  ordered_json header = ordered_json::parse(line);
  if (header.value("format", "") != "duogate-dataset")
    throw std::invalid_argument("not a dataset file");
  IntentDataset ds;
  ds.split = header.at("split").get<std::string>();
  ds.synth_blob = header.value("synth", "");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    ordered_json j = ordered_json::parse(line);
    Sample s;
    s.text = j.at("text").get<std::string>();
    s.role.kind = role_kind_from_name(j.at("role").get<std::string>());
    if (j.contains("intent_id")) s.role.intent_id = j.at("intent_id").get<std::int64_t>();
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace duogate
