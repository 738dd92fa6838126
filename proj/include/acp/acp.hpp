#pragma once

// Umbrella header: the full admission-control library.

#include "acp/canonical.hpp"
#include "acp/conformance.hpp"
#include "acp/errors.hpp"
#include "acp/execution.hpp"
#include "acp/experiments.hpp"
#include "acp/hash.hpp"
#include "acp/ledger.hpp"
#include "acp/policy.hpp"
#include "acp/risk.hpp"
#include "acp/signing.hpp"
#include "acp/trace_store.hpp"
