// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "prosoctl/afp/model.hpp"
#include "prosoctl/control/edits.hpp"
#include "prosoctl/dsp/wav.hpp"
#include "prosoctl/eval/render.hpp"

namespace prosoctl::service {

using corpus::Utterance;

/// Failure carrying the HTTP status it maps to.
class ServiceError : public Error {
 public:
  ServiceError(int status, const std::string& message) : Error(message), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

inline ServiceError not_found(const std::string& m) { return {404, m}; }
inline ServiceError bad_request(const std::string& m) { return {400, m}; }
inline ServiceError conflict(const std::string& m) { return {409, m}; }

/// Read-only inputs shared by all sessions.
struct ServiceContext {
  std::map<std::string, Utterance> utterances;  // skeletons without spans
  features::StatsTable stats;
  afp::AfpCheckpoint checkpoint;
  eval::RenderSetup setup;
};

inline ServiceContext make_context(const std::vector<corpus::FeatureRecord>& records,
                                   features::StatsTable stats, afp::AfpCheckpoint ckpt,
                                   eval::RenderSetup setup) {
  afp::validate_checkpoint(ckpt);
  if (!ckpt.stats_version.empty() && ckpt.stats_version != stats.version)
    throw VersionError("service: checkpoint was trained with stats " + ckpt.stats_version +
                       ", loaded stats are " + stats.version);
  ServiceContext c;
  for (const auto& r : records)
    c.utterances[r.utterance_id] = eval::utterance_of(r, setup.synth.sample_rate, setup.synth.hop);
  c.stats = std::move(stats);
  c.checkpoint = std::move(ckpt);
  c.setup = std::move(setup);
  return c;
}

struct RenditionSummary {
  std::uint64_t revision = 0;  // session revision that was rendered
  std::vector<AcousticFeatureVector> measured;
  std::vector<synth::SynthWarning> warnings;
  std::size_t n_samples = 0;
  std::shared_ptr<const std::vector<std::uint8_t>> wav;
  std::shared_ptr<const dsp::AudioBuffer> audio;
};

/// Immutable view of a session at one revision.
struct SessionState {
  std::string session_id;
  std::shared_ptr<const Utterance> utterance;
  std::shared_ptr<const std::vector<AcousticFeatureVector>> base;  // never changes
  control::EditScript script;                                      // all accepted ops
  std::vector<AcousticFeatureVector> current;
  std::uint64_t revision = 0;
  std::optional<RenditionSummary> rendition;
};

/// Normalized features after replaying `script` on `base`.
inline std::vector<AcousticFeatureVector> replay_features(const ServiceContext& ctx, const Utterance& utt,
                                                          const std::vector<AcousticFeatureVector>& base,
                                                          const control::EditScript& script) {
  return control::apply_edits(base, script, utt.phones, ctx.stats.at(utt.speaker_id));
}

/// Renders (base, script) exactly as a session would.
inline eval::Rendered replay_render(const ServiceContext& ctx, const Utterance& utt,
                                    const std::vector<AcousticFeatureVector>& base,
                                    const control::EditScript& script) {
  return eval::render(utt, replay_features(ctx, utt, base, script), ctx.stats.at(utt.speaker_id), ctx.setup);
}

namespace detail {

inline nlohmann::json vec_json(const AcousticFeatureVector& v) {
  return {{"f0", v.f0}, {"energy", v.energy}, {"duration", v.duration}};
}

}  // namespace detail

inline nlohmann::json to_json(const SessionState& s, const ServiceContext& ctx) {
  const auto& utt = *s.utterance;
  const auto& stats = ctx.stats.at(utt.speaker_id);
  const auto base_raw = eval::to_raw(*s.base, utt.phones, stats, ctx.setup.synth.timbre);
  const auto current_raw = eval::to_raw(s.current, utt.phones, stats, ctx.setup.synth.timbre);
  nlohmann::json phones = nlohmann::json::array();
  for (std::size_t i = 0; i < utt.phones.size(); ++i) {
    const auto& p = utt.phones[i];
    nlohmann::json pj = {{"index", i},
                         {"symbol", p.symbol},
                         {"kind", corpus::to_string(p.kind)},
                         {"stressed", p.stressed},
                         {"editable", !p.is_boundary()},
                         {"voiced", !p.is_boundary() && ctx.setup.synth.timbre.voiced(p.symbol)},
                         {"base", {{"normalized", detail::vec_json((*s.base)[i])}, {"raw", detail::vec_json(base_raw[i])}}},
                         {"current", {{"normalized", detail::vec_json(s.current[i])}, {"raw", detail::vec_json(current_raw[i])}}},
                         {"measured", nullptr}};
    if (s.rendition) pj["measured"] = detail::vec_json(s.rendition->measured[i]);
    phones.push_back(std::move(pj));
  }
  nlohmann::json rendition = nullptr;
  if (s.rendition) {
    nlohmann::json warnings = nlohmann::json::array();
    for (const auto& w : s.rendition->warnings) warnings.push_back({{"phone_index", w.phone_index}, {"message", w.message}});
    rendition = {{"revision", s.rendition->revision},
                 {"stale", s.rendition->revision != s.revision},
                 {"audio", "/sessions/" + s.session_id + "/audio"},
                 {"sample_rate", ctx.setup.synth.sample_rate},
                 {"n_samples", s.rendition->n_samples},
                 {"warnings", warnings}};
  }
  return {{"session_id", s.session_id},
          {"utterance_id", utt.utterance_id},
          {"speaker_id", utt.speaker_id},
          {"revision", s.revision},
          {"speaker_stats",
           {{"f0", {{"mean", stats.f0.mean}, {"std", stats.f0.std}}},
            {"energy", {{"mean", stats.energy.mean}, {"std", stats.energy.std}}},
            {"duration", {{"mean", stats.duration.mean}, {"std", stats.duration.std}}}}},
          {"script", control::to_json(s.script)},
          {"phones", phones},
          {"rendition", rendition}};
}

/// In-memory sessions. Each session publishes immutable snapshots; writers
/// are serialized per session and must name the revision they edit.
class SessionManager {
 public:
  explicit SessionManager(ServiceContext ctx, std::optional<std::filesystem::path> snapshot_dir = {})
      : ctx_(std::move(ctx)), snapshot_dir_(std::move(snapshot_dir)) {
    if (snapshot_dir_) std::filesystem::create_directories(*snapshot_dir_);
  }

  const ServiceContext& context() const { return ctx_; }

  std::shared_ptr<const SessionState> create(const std::string& utterance_id,
                                             const std::optional<std::string>& speaker_id = {}) {
    const auto it = ctx_.utterances.find(utterance_id);
    if (it == ctx_.utterances.end()) throw not_found("unknown utterance " + utterance_id);
    if (speaker_id && *speaker_id != it->second.speaker_id)
      throw not_found("utterance " + utterance_id + " has no speaker " + *speaker_id);
    ctx_.stats.at(it->second.speaker_id);
    auto state = std::make_shared<SessionState>();
    state->session_id = "s" + std::to_string(next_id_.fetch_add(1) + 1);
    state->utterance = std::make_shared<const Utterance>(it->second);
    state->base = std::make_shared<const std::vector<AcousticFeatureVector>>(
        afp::afp_forward(it->second.phones, it->second.speaker_id, ctx_.checkpoint));
    state->current = *state->base;
    auto slot = std::make_shared<Slot>();
    slot->state = state;
    {
      std::unique_lock lock(sessions_mutex_);
      sessions_[state->session_id] = slot;
    }
    persist(*state);
    return state;
  }

  std::shared_ptr<const SessionState> get(const std::string& id) const { return slot(id)->load(); }

  std::vector<std::string> ids() const {
    std::shared_lock lock(sessions_mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : sessions_) out.push_back(id);
    return out;
  }

  /// Appends `delta` to the session's script if `revision` is current.
  std::shared_ptr<const SessionState> edit(const std::string& id, std::uint64_t revision,
                                           const control::EditScript& delta) {
    auto s = slot(id);
    std::lock_guard writer(s->write_mutex);
    const auto cur = s->load();
    if (revision != cur->revision)
      throw conflict("revision " + std::to_string(revision) + " is stale; current is " +
                     std::to_string(cur->revision));
    auto next = std::make_shared<SessionState>(*cur);
    next->script.ops.insert(next->script.ops.end(), delta.ops.begin(), delta.ops.end());
    if (!delta.author.empty()) next->script.author = delta.author;
    if (!delta.note.empty()) next->script.note = delta.note;
    try {
      next->current = replay_features(ctx_, *cur->utterance, *cur->base, next->script);
    } catch (const DataError& e) {
      throw bad_request(e.what());
    }
    next->revision = cur->revision + 1;
    s->store(next);
    persist(*next);
    return next;
  }

  /// Restores base features; counts as an edit.
  std::shared_ptr<const SessionState> reset(const std::string& id, std::optional<std::uint64_t> revision = {}) {
    auto s = slot(id);
    std::lock_guard writer(s->write_mutex);
    const auto cur = s->load();
    if (revision && *revision != cur->revision)
      throw conflict("revision " + std::to_string(*revision) + " is stale; current is " +
                     std::to_string(cur->revision));
    auto next = std::make_shared<SessionState>(*cur);
    next->script = {};
    next->current = *cur->base;
    next->revision = cur->revision + 1;
    s->store(next);
    persist(*next);
    return next;
  }

  /// Renders the current revision and re-measures it.
  std::shared_ptr<const SessionState> synthesize(const std::string& id) {
    auto s = slot(id);
    const auto cur = s->load();
    if (cur->rendition && cur->rendition->revision == cur->revision) return cur;
    auto rendered = eval::render(*cur->utterance, cur->current, ctx_.stats.at(cur->utterance->speaker_id), ctx_.setup);
    RenditionSummary summary;
    summary.revision = cur->revision;
    summary.measured = rendered.analysis.per_phone;
    summary.warnings = rendered.rendition.warnings;
    summary.n_samples = rendered.rendition.audio.size();
    summary.wav = std::make_shared<const std::vector<std::uint8_t>>(dsp::encode_wav(rendered.rendition.audio));
    summary.audio = std::make_shared<const dsp::AudioBuffer>(std::move(rendered.rendition.audio));
    std::lock_guard writer(s->write_mutex);
    const auto latest = s->load();
    // An edit may have landed while rendering; keep the newer state.
    if (latest->revision != cur->revision) return latest;
    auto next = std::make_shared<SessionState>(*latest);
    next->rendition = std::move(summary);
    s->store(next);
    return next;
  }

  std::shared_ptr<const std::vector<std::uint8_t>> audio(const std::string& id) const {
    const auto cur = get(id);
    if (!cur->rendition) throw not_found("session " + id + " has not been synthesized");
    return cur->rendition->wav;
  }

  /// Recreates sessions persisted in the snapshot directory.
  std::size_t load_snapshots() {
    if (!snapshot_dir_) return 0;
    std::size_t n = 0;
    for (const auto& entry : std::filesystem::directory_iterator(*snapshot_dir_)) {
      if (entry.path().extension() != ".json") continue;
      std::ifstream f(entry.path());
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(f);
      } catch (const nlohmann::json::exception& e) {
        throw DataError(entry.path().string() + ": " + e.what());
      }
      restore(j, entry.path().string());
      ++n;
    }
    return n;
  }

 private:
  struct Slot {
    std::mutex write_mutex;
    mutable std::mutex ptr_mutex;
    std::shared_ptr<const SessionState> state;

    std::shared_ptr<const SessionState> load() const {
      std::lock_guard l(ptr_mutex);
      return state;
    }
    void store(std::shared_ptr<const SessionState> s) {
      std::lock_guard l(ptr_mutex);
      state = std::move(s);
    }
  };

  std::shared_ptr<Slot> slot(const std::string& id) const {
    std::shared_lock lock(sessions_mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw not_found("unknown session " + id);
    return it->second;
  }

  void persist(const SessionState& s) const {
    if (!snapshot_dir_) return;
    const nlohmann::json j = {{"session_id", s.session_id},
                              {"utterance_id", s.utterance->utterance_id},
                              {"speaker_id", s.utterance->speaker_id},
                              {"revision", s.revision},
                              {"script", control::to_json(s.script)}};
    const auto path = *snapshot_dir_ / (s.session_id + ".json");
    const auto tmp = path.string() + ".tmp";
    {
      std::ofstream f(tmp);
      f << j.dump(2) << "\n";
      if (!f) throw DataError("cannot write session snapshot " + tmp);
    }
    std::filesystem::rename(tmp, path);
  }

  void restore(const nlohmann::json& j, const std::string& source) {
    try {
      const auto id = j.at("session_id").get<std::string>();
      const auto utt_id = j.at("utterance_id").get<std::string>();
      const auto it = ctx_.utterances.find(utt_id);
      if (it == ctx_.utterances.end()) throw DataError(source + ": unknown utterance " + utt_id);
      auto state = std::make_shared<SessionState>();
      state->session_id = id;
      state->utterance = std::make_shared<const Utterance>(it->second);
      state->base = std::make_shared<const std::vector<AcousticFeatureVector>>(
          afp::afp_forward(it->second.phones, it->second.speaker_id, ctx_.checkpoint));
      state->script = control::edit_script_from_json(j.at("script"));
      state->current = replay_features(ctx_, it->second, *state->base, state->script);
      state->revision = j.at("revision").get<std::uint64_t>();
      auto slot = std::make_shared<Slot>();
      slot->state = state;
      std::unique_lock lock(sessions_mutex_);
      sessions_[id] = slot;
      if (id.size() > 1 && id[0] == 's') {
        try {
          const auto n = std::stoull(id.substr(1));
          std::uint64_t expected = next_id_.load();
          while (n > expected && !next_id_.compare_exchange_weak(expected, n)) {
          }
        } catch (const std::exception&) {
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError(source + ": " + e.what());
    }
  }

  ServiceContext ctx_;
  std::optional<std::filesystem::path> snapshot_dir_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::atomic<std::uint64_t> next_id_{0};
};

}  // namespace prosoctl::service
