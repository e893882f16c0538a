#pragma once

// Core library: Gaussian states, chain models, noise channels and recovery
// fidelities. The dense reference implementation lives in mml/oracle.hpp and
// the scenario harness in mml/harness/.

#include "mml/channels.hpp"
#include "mml/core.hpp"
#include "mml/fgs.hpp"
#include "mml/kitaev.hpp"
#include "mml/pfaffian.hpp"
#include "mml/recovery.hpp"
