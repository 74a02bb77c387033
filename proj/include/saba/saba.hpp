#pragma once

#include "saba/backend/cache.hpp"
#include "saba/backend/cost.hpp"
#include "saba/backend/embedding.hpp"
#include "saba/backend/http.hpp"
#include "saba/backend/mock.hpp"
#include "saba/backend/provider.hpp"
#include "saba/backend/types.hpp"
#include "saba/cli/commands.hpp"
#include "saba/core/serde.hpp"
#include "saba/core/state.hpp"
#include "saba/core/types.hpp"
#include "saba/data/dataset.hpp"
#include "saba/errors.hpp"
#include "saba/eval/matching.hpp"
#include "saba/eval/propositions.hpp"
#include "saba/eval/reliability.hpp"
#include "saba/eval/scoring.hpp"
#include "saba/fusion/fusion.hpp"
#include "saba/prompts/templates.hpp"
#include "saba/qsr/engine.hpp"
#include "saba/trace/store.hpp"
#include "saba/util.hpp"
