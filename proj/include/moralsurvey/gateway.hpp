#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "moralsurvey/forms.hpp"
#include "moralsurvey/log.hpp"

namespace moralsurvey {

enum class RespondentKind { ChatEndpoint, CompletionEndpoint, Mock };

inline std::string to_string(RespondentKind k) {
  switch (k) {
    case RespondentKind::ChatEndpoint: return "chat";
    case RespondentKind::CompletionEndpoint: return "completion";
    case RespondentKind::Mock: return "mock";
  }
  throw std::logic_error("bad RespondentKind");
}

inline RespondentKind respondent_kind_from_string(const std::string& s) {
  if (s == "chat") return RespondentKind::ChatEndpoint;
  if (s == "completion") return RespondentKind::CompletionEndpoint;
  if (s == "mock") return RespondentKind::Mock;
  throw std::invalid_argument("unknown respondent kind: '" + s + "'");
}

/// Scripted reply distribution for one (scenario, form) pair; "*" wildcards.
struct MockRule {
  std::string scenario = "*";
  std::string form = "*";
  std::vector<std::pair<std::string, double>> replies;  // text -> weight
};

struct RespondentSpec {
  std::string model;
  RespondentKind kind = RespondentKind::Mock;

  // Endpoint respondents.
  std::string endpoint;           // base URL, e.g. "https://api.example.com"
  std::string path;               // empty -> kind default
  std::string auth_env;           // environment variable holding the API key
  std::string response_text_pointer;  // JSON pointer override for the reply text
  int requests_per_minute = 0;    // 0 = unthrottled
  int max_attempts = 5;
  int backoff_ms = 250;
  int timeout_ms = 30000;
  int parallelism = 1;

  // Sampling parameters.
  double temperature = 1.0;
  int max_tokens = 64;
  int samples_per_form = 1;  // M; the collection plan overrides this per split

  // Mock respondents.
  uint64_t seed = 0;
  std::vector<MockRule> behavior;

  std::string effective_path() const {
    if (!path.empty()) return path;
    return kind == RespondentKind::ChatEndpoint ? "/v1/chat/completions" : "/v1/completions";
  }

  void validate() const {
    if (model.empty()) throw std::invalid_argument("respondent spec: empty model id");
    if (samples_per_form < 1)
      throw std::invalid_argument("respondent '" + model + "': samples per form must be >= 1");
    if (temperature < 0.0)
      throw std::invalid_argument("respondent '" + model + "': temperature must be >= 0");
    if (kind == RespondentKind::Mock) {
      if (behavior.empty())
        throw std::invalid_argument("mock respondent '" + model + "': empty behavior table");
      for (const auto& rule : behavior) {
        if (rule.replies.empty())
          throw std::invalid_argument("mock respondent '" + model + "': rule with no replies");
        double total = 0.0;
        for (const auto& [_, w] : rule.replies) {
          if (w < 0.0)
            throw std::invalid_argument("mock respondent '" + model + "': negative reply weight");
          total += w;
        }
        if (total <= 0.0)
          throw std::invalid_argument("mock respondent '" + model + "': zero total reply weight");
      }
    } else if (endpoint.empty()) {
      throw std::invalid_argument("respondent '" + model + "': missing endpoint base URL");
    }
  }
};

struct SampleResult {
  std::string raw;
  int64_t ts_ms = 0;
  bool transport_error = false;
};

/// Endpoint misconfiguration (bad auth, missing key, rejected request shape).
struct ConfigurationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline uint64_t fnv1a(std::string_view data, uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline uint64_t mix_seed(uint64_t seed, std::string_view model, std::string_view scenario,
                         std::string_view form, int sample_index) {
  uint64_t h = fnv1a(model);
  h = fnv1a(scenario, h);
  h = fnv1a(form, h);
  h = fnv1a(std::to_string(sample_index), h);
  return h ^ (seed * 0x9e3779b97f4a7c15ULL + 0x2545F4914F6CDD1DULL);
}

inline const MockRule* resolve_mock_rule(const RespondentSpec& spec, const std::string& scenario,
                                         const std::string& form) {
  const MockRule* best = nullptr;
  int best_rank = -1;
  for (const auto& rule : spec.behavior) {
    bool s_match = rule.scenario == "*" || rule.scenario == scenario;
    bool f_match = rule.form == "*" || rule.form == form;
    if (!s_match || !f_match) continue;
    int rank = (rule.scenario != "*" ? 2 : 0) + (rule.form != "*" ? 1 : 0);
    if (rank > best_rank) {
      best = &rule;
      best_rank = rank;
    }
  }
  return best;
}

// Reply texts are literal, except the placeholders "{action1}" and
// "{action2}" which resolve to whatever string denotes that action under the
// current form (e.g. "B" on a reversed A/B form, the verbatim action text on
// a repeat form).
inline std::string resolve_mock_reply(const std::string& reply, const RenderedForm& prompt) {
  if (reply == "{action1}") return prompt.expected.for_action(1).canonical;
  if (reply == "{action2}") return prompt.expected.for_action(2).canonical;
  return reply;
}

/// Deterministic draw: one uniform in [0, 1) from a per-sample generator, so
/// the reply depends only on (seed, model, scenario, form, sample index).
inline std::string sample_mock(const RespondentSpec& spec, const RenderedForm& prompt,
                               int sample_index) {
  const MockRule* rule = resolve_mock_rule(spec, prompt.scenario_id, prompt.form.id);
  if (!rule)
    throw ConfigurationError("mock respondent '" + spec.model + "': no behavior rule for (" +
                             prompt.scenario_id + ", " + prompt.form.id + ")");
  std::mt19937_64 rng(mix_seed(spec.seed, spec.model, prompt.scenario_id, prompt.form.id, sample_index));
  rng.discard(3);
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;

  double total = 0.0;
  for (const auto& [_, w] : rule->replies) total += w;
  double acc = 0.0;
  for (const auto& [reply, w] : rule->replies) {
    acc += w / total;
    if (u < acc) return resolve_mock_reply(reply, prompt);
  }
  return resolve_mock_reply(rule->replies.back().first, prompt);
}

inline json chat_payload(const RespondentSpec& spec, const RenderedForm& prompt) {
  return json{{"model", spec.model},
              {"messages", json::array({json{{"role", "system"}, {"content", prompt.header}},
                                        json{{"role", "user"}, {"content", prompt.body}}})},
              {"temperature", spec.temperature},
              {"max_tokens", spec.max_tokens}};
}

inline json completion_payload(const RespondentSpec& spec, const RenderedForm& prompt) {
  return json{{"model", spec.model},
              {"prompt", prompt.header + "\n" + prompt.body},
              {"temperature", spec.temperature},
              {"max_tokens", spec.max_tokens}};
}

inline std::string extract_reply(const RespondentSpec& spec, const std::string& body) {
  json doc = json::parse(body);
  std::string pointer = spec.response_text_pointer;
  if (pointer.empty())
    pointer = spec.kind == RespondentKind::ChatEndpoint ? "/choices/0/message/content"
                                                        : "/choices/0/text";
  return doc.at(json::json_pointer(pointer)).get<std::string>();
}

inline std::string sample_endpoint(const RespondentSpec& spec, const RenderedForm& prompt,
                                   bool& transport_error) {
  httplib::Client client(spec.endpoint);
  client.set_connection_timeout(spec.timeout_ms / 1000, (spec.timeout_ms % 1000) * 1000);
  client.set_read_timeout(spec.timeout_ms / 1000, (spec.timeout_ms % 1000) * 1000);

  httplib::Headers headers;
  if (!spec.auth_env.empty()) {
    const char* token = std::getenv(spec.auth_env.c_str());
    if (!token || !*token)
      throw ConfigurationError("respondent '" + spec.model + "': environment variable '" +
                               spec.auth_env + "' is not set");
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }

  const json payload = spec.kind == RespondentKind::ChatEndpoint ? chat_payload(spec, prompt)
                                                                 : completion_payload(spec, prompt);
  const std::string body = payload.dump();

  for (int attempt = 1; attempt <= spec.max_attempts; ++attempt) {
    auto res = client.Post(spec.effective_path(), headers, body, "application/json");
    if (res) {
      if (res->status == 401 || res->status == 403)
        throw ConfigurationError("respondent '" + spec.model + "': authentication rejected (HTTP " +
                                 std::to_string(res->status) + ")");
      if (res->status >= 200 && res->status < 300) {
        try {
          transport_error = false;
          return extract_reply(spec, res->body);
        } catch (const std::exception& e) {
          throw ConfigurationError("respondent '" + spec.model +
                                   "': cannot parse endpoint response: " + e.what());
        }
      }
      if (res->status >= 400 && res->status < 500 && res->status != 429)
        throw ConfigurationError("respondent '" + spec.model + "': endpoint rejected request (HTTP " +
                                 std::to_string(res->status) + ")");
    }
    if (attempt < spec.max_attempts)
      std::this_thread::sleep_for(std::chrono::milliseconds(spec.backoff_ms << (attempt - 1)));
  }
  transport_error = true;
  return "";
}

}  // namespace detail

/// One completion for one rendered form. Every call is independent: no
/// conversation state is carried between questions.
inline SampleResult sample(const RespondentSpec& spec, const RenderedForm& prompt,
                           int sample_index = 1) {
  SampleResult out;
  if (spec.kind == RespondentKind::Mock) {
    out.raw = detail::sample_mock(spec, prompt, sample_index);
    out.ts_ms = now_ms();
    return out;
  }
  out.raw = detail::sample_endpoint(spec, prompt, out.transport_error);
  out.ts_ms = now_ms();
  return out;
}

// ---------------------------------------------------------------------------
// Collection
// ---------------------------------------------------------------------------

struct CollectionPlan {
  const Dataset* dataset = nullptr;
  std::vector<RespondentSpec> respondents;
  std::vector<QuestionForm> forms;  // empty -> all six
  int samples_per_form = 0;         // M; 0 -> each respondent's own value
  bool resume = false;
  std::string log_path;
};

struct CollectionSummary {
  int requested = 0;
  int skipped = 0;  // already present (resume)
  int written = 0;
  int transport_failures = 0;
  std::vector<std::string> missing;  // "(model, scenario, form, sample)" tuples never recorded
  std::vector<std::string> errors;   // fatal per-respondent failures
};

namespace detail {

// Mock logs must be byte-stable across runs, so their timestamps come from a
// virtual per-model clock instead of the wall clock.
constexpr int64_t kVirtualClockBase = 946684800000;  // 2000-01-01T00:00:00.000Z

struct TupleKey {
  std::string model, scenario, form;
  int sample;
  auto operator<=>(const TupleKey&) const = default;
};

}  // namespace detail

/// Issues M samples for every (scenario, form, respondent) and appends one
/// record per sample. Resume skips tuples already in the log; an interrupted
/// run plus a resumed run produce the same log as one uninterrupted run.
inline CollectionSummary collect(const CollectionPlan& plan, const SurveyAssets& assets,
                                 std::ostream* progress = nullptr) {
  if (!plan.dataset) throw std::invalid_argument("collect: no dataset");
  plan.dataset->validate();
  if (plan.respondents.empty()) throw std::invalid_argument("collect: no respondents");
  for (const auto& r : plan.respondents) r.validate();
  if (plan.log_path.empty()) throw std::invalid_argument("collect: no log path");

  const std::vector<QuestionForm> forms = plan.forms.empty() ? all_forms() : plan.forms;

  std::set<detail::TupleKey> existing;
  std::map<std::string, int64_t> model_clock;  // virtual clock offset per model
  std::map<std::pair<std::string, std::string>, int64_t> last_ts;  // per (model, form)

  if (std::filesystem::exists(plan.log_path)) {
    if (!plan.resume)
      throw std::runtime_error("collect: log '" + plan.log_path +
                               "' already exists; pass resume to continue it");
    for (const auto& r : read_response_log(plan.log_path)) {
      existing.insert({r.model, r.scenario, r.form, r.sample});
      ++model_clock[r.model];
    }
  }

  std::ofstream out(plan.log_path, std::ios::app);
  if (!out) throw std::runtime_error("collect: cannot open log for append: " + plan.log_path);

  // Render all prompts once; they are shared across respondents.
  std::vector<std::vector<RenderedForm>> rendered;  // [scenario][form]
  for (const auto& scenario : plan.dataset->scenarios) {
    std::vector<RenderedForm> row;
    for (const auto& f : forms) row.push_back(render(scenario, f, assets));
    rendered.push_back(std::move(row));
  }

  CollectionSummary summary;
  for (const auto& spec : plan.respondents) {
    const int m = plan.samples_per_form > 0 ? plan.samples_per_form : spec.samples_per_form;
    summary.requested += static_cast<int>(rendered.size() * forms.size()) * m;
    bool aborted = false;
    std::string abort_reason;
    int64_t next_allowed_ms = 0;

    for (size_t si = 0; si < rendered.size(); ++si) {
      for (size_t fi = 0; fi < rendered[si].size(); ++fi) {
        const RenderedForm& prompt = rendered[si][fi];

        std::vector<int> pending;
        for (int sample_index = 1; sample_index <= m; ++sample_index) {
          detail::TupleKey key{spec.model, prompt.scenario_id, prompt.form.id, sample_index};
          if (existing.count(key))
            ++summary.skipped;
          else if (!aborted)
            pending.push_back(sample_index);
        }

        // Fetch, possibly in parallel waves, then append in sample order so
        // the log stays a deterministic single-writer stream.
        std::map<int, SampleResult> results;
        const size_t bound = spec.kind == RespondentKind::Mock
                                 ? 1
                                 : static_cast<size_t>(std::max(1, spec.parallelism));
        for (size_t w = 0; w < pending.size() && !aborted; w += bound) {
          std::vector<std::pair<int, std::future<SampleResult>>> wave;
          for (size_t k = w; k < std::min(pending.size(), w + bound); ++k) {
            const int sample_index = pending[k];
            if (spec.kind != RespondentKind::Mock && spec.requests_per_minute > 0) {
              int64_t now = now_ms();
              if (now < next_allowed_ms)
                std::this_thread::sleep_for(std::chrono::milliseconds(next_allowed_ms - now));
              next_allowed_ms = std::max(now, next_allowed_ms) + 60000 / spec.requests_per_minute;
            }
            if (bound == 1) {
              try {
                results[sample_index] = sample(spec, prompt, sample_index);
              } catch (const ConfigurationError& e) {
                aborted = true;
                abort_reason = e.what();
                break;
              }
            } else {
              wave.emplace_back(sample_index, std::async(std::launch::async, [&spec, &prompt,
                                                                              sample_index] {
                                  return sample(spec, prompt, sample_index);
                                }));
            }
          }
          for (auto& [sample_index, fut] : wave) {
            try {
              results[sample_index] = fut.get();
            } catch (const ConfigurationError& e) {
              aborted = true;
              abort_reason = e.what();
            }
          }
        }

        for (const auto& [sample_index, result] : results) {
          ResponseRecord record;
          record.model = spec.model;
          record.scenario = prompt.scenario_id;
          record.form = prompt.form.id;
          record.sample = sample_index;
          record.raw = result.raw;
          record.transport_error = result.transport_error;

          int64_t ts = spec.kind == RespondentKind::Mock
                           ? detail::kVirtualClockBase + model_clock[spec.model]++
                           : result.ts_ms;
          auto stream_key = std::make_pair(record.model, record.form);
          auto it = last_ts.find(stream_key);
          if (it != last_ts.end() && ts < it->second) ts = it->second;
          last_ts[stream_key] = ts;
          record.ts = format_timestamp_ms(ts);

          out << record_to_json(record).dump() << "\n";
          out.flush();
          existing.insert({record.model, record.scenario, record.form, record.sample});
          ++summary.written;
          if (record.transport_error) ++summary.transport_failures;
        }
        if (aborted) break;
      }
      if (progress)
        (*progress) << spec.model << ": " << (si + 1) << "/" << rendered.size() << " scenarios\n";
      if (aborted) break;
    }
    if (aborted) summary.errors.push_back(spec.model + ": " + abort_reason);
  }

  // Anything neither skipped nor written is still missing.
  for (const auto& spec : plan.respondents) {
    const int m = plan.samples_per_form > 0 ? plan.samples_per_form : spec.samples_per_form;
    for (const auto& scenario : plan.dataset->scenarios)
      for (const auto& f : forms)
        for (int sample_index = 1; sample_index <= m; ++sample_index)
          if (!existing.count({spec.model, scenario.id, f.id, sample_index}))
            summary.missing.push_back("(" + spec.model + ", " + scenario.id + ", " + f.id + ", " +
                                      std::to_string(sample_index) + ")");
  }
  return summary;
}

}  // namespace moralsurvey
