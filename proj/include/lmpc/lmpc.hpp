#pragma once

#include "lmpc/bits.hpp"
#include "lmpc/chain.hpp"
#include "lmpc/compression.hpp"
#include "lmpc/config.hpp"
#include "lmpc/error.hpp"
#include "lmpc/experiments.hpp"
#include "lmpc/mpc_engine.hpp"
#include "lmpc/oracle.hpp"
#include "lmpc/prf.hpp"
#include "lmpc/ram_eval.hpp"
#include "lmpc/strategies.hpp"
