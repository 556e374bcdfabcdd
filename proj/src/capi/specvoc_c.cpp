#include "specvoc/specvoc.h"

#include <exception>
#include <new>
#include <string>

#include "core/artifacts.hpp"
#include "core/error.hpp"
#include "core/experiment.hpp"
#include "core/meta_router.hpp"
#include "core/shortlist.hpp"
#include "core/theory.hpp"
#include "core/toy_lm.hpp"

struct specvoc_report {
  std::string json;
  int passed = -1;
};

struct specvoc_model {
  specvoc::ToyModelPair model;
};

struct specvoc_partition {
  specvoc::ClusterPartition partition;
};

struct specvoc_router {
  specvoc::RouterModel router;
};

namespace {

thread_local std::string g_last_error;

specvoc_status status_of(specvoc::ErrorCode code) {
  using specvoc::ErrorCode;
  switch (code) {
    case ErrorCode::kIndexOutOfRange: return SPECVOC_ERR_INDEX_OUT_OF_RANGE;
    case ErrorCode::kEmptyShortlist: return SPECVOC_ERR_EMPTY_SHORTLIST;
    case ErrorCode::kEmptyInput: return SPECVOC_ERR_EMPTY_INPUT;
    case ErrorCode::kInvalidBudget: return SPECVOC_ERR_INVALID_BUDGET;
    case ErrorCode::kInvalidToken: return SPECVOC_ERR_INVALID_TOKEN;
    case ErrorCode::kNonFiniteLoss: return SPECVOC_ERR_NON_FINITE_LOSS;
    case ErrorCode::kDegenerateColumn: return SPECVOC_ERR_DEGENERATE_COLUMN;
    case ErrorCode::kInvalidClusterCount: return SPECVOC_ERR_INVALID_CLUSTER_COUNT;
    case ErrorCode::kInvalidClusterId: return SPECVOC_ERR_INVALID_CLUSTER_ID;
    case ErrorCode::kShapeError: return SPECVOC_ERR_SHAPE;
    case ErrorCode::kZeroMassSubset: return SPECVOC_ERR_ZERO_MASS_SUBSET;
    case ErrorCode::kInfeasibleEnumeration: return SPECVOC_ERR_INFEASIBLE_ENUMERATION;
    case ErrorCode::kInvalidProposal: return SPECVOC_ERR_INVALID_PROPOSAL;
    case ErrorCode::kEmptyTrace: return SPECVOC_ERR_EMPTY_TRACE;
    case ErrorCode::kHashMismatch: return SPECVOC_ERR_HASH_MISMATCH;
    case ErrorCode::kIoError: return SPECVOC_ERR_IO;
    case ErrorCode::kConfigError: return SPECVOC_ERR_CONFIG;
  }
  return SPECVOC_ERR_INTERNAL;
}

template <class F>
specvoc_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return SPECVOC_OK;
  } catch (const specvoc::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SPECVOC_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = std::string("Internal: ") + e.what();
    return SPECVOC_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "Internal: unknown exception";
    return SPECVOC_ERR_INTERNAL;
  }
}

specvoc_status ok() {
  g_last_error.clear();
  return SPECVOC_OK;
}

specvoc_status invalid(const char* message) {
  g_last_error = std::string("InvalidArgument: ") + message;
  return SPECVOC_ERR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* specvoc_status_name(specvoc_status status) {
  switch (status) {
    case SPECVOC_OK: return "Ok";
    case SPECVOC_ERR_INDEX_OUT_OF_RANGE: return "IndexOutOfRange";
    case SPECVOC_ERR_EMPTY_SHORTLIST: return "EmptyShortlist";
    case SPECVOC_ERR_EMPTY_INPUT: return "EmptyInput";
    case SPECVOC_ERR_INVALID_BUDGET: return "InvalidBudget";
    case SPECVOC_ERR_INVALID_TOKEN: return "InvalidToken";
    case SPECVOC_ERR_NON_FINITE_LOSS: return "NonFiniteLoss";
    case SPECVOC_ERR_DEGENERATE_COLUMN: return "DegenerateColumn";
    case SPECVOC_ERR_INVALID_CLUSTER_COUNT: return "InvalidClusterCount";
    case SPECVOC_ERR_INVALID_CLUSTER_ID: return "InvalidClusterId";
    case SPECVOC_ERR_SHAPE: return "ShapeError";
    case SPECVOC_ERR_ZERO_MASS_SUBSET: return "ZeroMassSubset";
    case SPECVOC_ERR_INFEASIBLE_ENUMERATION: return "InfeasibleEnumeration";
    case SPECVOC_ERR_INVALID_PROPOSAL: return "InvalidProposal";
    case SPECVOC_ERR_EMPTY_TRACE: return "EmptyTrace";
    case SPECVOC_ERR_HASH_MISMATCH: return "HashMismatch";
    case SPECVOC_ERR_IO: return "IoError";
    case SPECVOC_ERR_CONFIG: return "ConfigError";
    case SPECVOC_ERR_INVALID_ARGUMENT: return "InvalidArgument";
    case SPECVOC_ERR_INTERNAL: return "Internal";
  }
  return "Unknown";
}

const char* specvoc_last_error_message(void) { return g_last_error.c_str(); }

const char* specvoc_version(void) { return specvoc::library_version(); }

specvoc_status specvoc_run(const char* command, const char* config_json, specvoc_report** out) {
  if (command == nullptr || out == nullptr) return invalid("command and out must be non-null");
  *out = nullptr;
  return guarded([&] {
    specvoc::Json config = specvoc::Json::object();
    if (config_json != nullptr && *config_json != '\0') {
      try {
        config = specvoc::Json::parse(config_json);
      } catch (const specvoc::Json::exception& e) {
        specvoc::fail(specvoc::ErrorCode::kConfigError, std::string("malformed config JSON: ") + e.what());
      }
    }
    const specvoc::Json result = specvoc::run_command(command, config);
    auto* report = new specvoc_report;
    report->json = result.dump(2);
    if (result.contains("passed")) report->passed = result.at("passed").get<bool>() ? 1 : 0;
    *out = report;
  });
}

const char* specvoc_default_config(void) {
  static const std::string text = specvoc::default_config().dump(2);
  return text.c_str();
}

const char* specvoc_report_json(const specvoc_report* report) {
  return report == nullptr ? "" : report->json.c_str();
}

int specvoc_report_passed(const specvoc_report* report) {
  return report == nullptr ? -1 : report->passed;
}

void specvoc_report_free(specvoc_report* report) { delete report; }

specvoc_status specvoc_omega(double alpha, size_t gamma, double* out) {
  if (out == nullptr) return invalid("out must be non-null");
  if (!(alpha >= 0.0 && alpha <= 1.0) || gamma < 1) return invalid("need 0 <= alpha <= 1, gamma >= 1");
  *out = specvoc::omega(alpha, gamma);
  return ok();
}

specvoc_status specvoc_speedup(double t_target, double t_draft, double t_verify, double alpha,
                               size_t gamma, double* out) {
  if (out == nullptr) return invalid("out must be non-null");
  if (!(t_target > 0.0) || !(t_draft >= 0.0) || !(t_verify > 0.0)) {
    return invalid("durations must be positive");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0) || gamma < 1) return invalid("need 0 <= alpha <= 1, gamma >= 1");
  *out = specvoc::speedup(t_target, t_draft, t_verify, alpha, gamma);
  return ok();
}

specvoc_status specvoc_beta(const double* p, const double* q, size_t n, double* out) {
  if (p == nullptr || q == nullptr || out == nullptr) return invalid("null pointer argument");
  return guarded([&] { *out = specvoc::beta({p, n}, {q, n}); });
}

specvoc_status specvoc_budget(size_t t, size_t k_max, size_t k_min, size_t* out) {
  if (out == nullptr) return invalid("out must be non-null");
  if (k_min < 1 || k_min > k_max) return invalid("need 1 <= k_min <= k_max");
  *out = specvoc::budget(t, specvoc::BudgetSchedule{k_max, k_min});
  return ok();
}

specvoc_status specvoc_pafr_budget(size_t t, size_t k_max, size_t* out) {
  if (out == nullptr) return invalid("out must be non-null");
  if (k_max < 1) return invalid("need k_max >= 1");
  *out = specvoc::position_aware_frequency_budget(t, k_max);
  return ok();
}

specvoc_status specvoc_model_load(const char* dir, specvoc_model** out) {
  if (dir == nullptr || out == nullptr) return invalid("dir and out must be non-null");
  *out = nullptr;
  return guarded([&] { *out = new specvoc_model{specvoc::load_model(dir)}; });
}

void specvoc_model_free(specvoc_model* model) { delete model; }

size_t specvoc_model_vocab_size(const specvoc_model* model) {
  return model == nullptr ? 0 : model->model.vocab_size();
}

size_t specvoc_model_hidden_dim(const specvoc_model* model) {
  return model == nullptr ? 0 : model->model.hidden_dim();
}

specvoc_status specvoc_model_next_distribution(const specvoc_model* model, const int32_t* tokens,
                                               size_t n, double* out, size_t out_len) {
  if (model == nullptr || tokens == nullptr || out == nullptr) return invalid("null pointer argument");
  if (out_len != model->model.vocab_size()) return invalid("out_len must equal the vocabulary size");
  return guarded([&] {
    const specvoc::Vector p = specvoc::target_next_distribution(model->model, {tokens, n});
    std::copy(p.begin(), p.end(), out);
  });
}

specvoc_status specvoc_partition_load(const char* json_path, specvoc_partition** out) {
  if (json_path == nullptr || out == nullptr) return invalid("path and out must be non-null");
  *out = nullptr;
  return guarded([&] {
    *out = new specvoc_partition{specvoc::partition_from_json(specvoc::read_json(json_path))};
  });
}

void specvoc_partition_free(specvoc_partition* partition) { delete partition; }

size_t specvoc_partition_num_clusters(const specvoc_partition* partition) {
  return partition == nullptr ? 0 : partition->partition.num_clusters;
}

specvoc_status specvoc_partition_cluster_of(const specvoc_partition* partition, int32_t token,
                                            size_t* out) {
  if (partition == nullptr || out == nullptr) return invalid("null pointer argument");
  if (token < 0 || static_cast<size_t>(token) >= partition->partition.vocab_size()) {
    g_last_error = "InvalidToken: token outside the partition vocabulary";
    return SPECVOC_ERR_INVALID_TOKEN;
  }
  *out = partition->partition.assignment[static_cast<size_t>(token)];
  return ok();
}

specvoc_status specvoc_router_load(const char* dir, specvoc_router** out) {
  if (dir == nullptr || out == nullptr) return invalid("dir and out must be non-null");
  *out = nullptr;
  return guarded([&] { *out = new specvoc_router{specvoc::load_router(dir)}; });
}

void specvoc_router_free(specvoc_router* router) { delete router; }

size_t specvoc_router_num_clusters(const specvoc_router* router) {
  return router == nullptr ? 0 : router->router.num_clusters();
}

specvoc_status specvoc_router_route(const specvoc_router* router, const double* prev_hidden,
                                    const double* token_embedding, size_t d, double* scores,
                                    size_t num_scores) {
  if (router == nullptr || prev_hidden == nullptr || token_embedding == nullptr || scores == nullptr) {
    return invalid("null pointer argument");
  }
  if (num_scores != router->router.num_clusters()) return invalid("num_scores must equal M");
  return guarded([&] {
    const specvoc::Vector s = specvoc::route(router->router, {prev_hidden, d}, {token_embedding, d});
    std::copy(s.begin(), s.end(), scores);
  });
}

}  // extern "C"
