#pragma once

#include "stabcon/bin_consensus.hpp"
#include "stabcon/core.hpp"
#include "stabcon/env.hpp"
#include "stabcon/invariants.hpp"
#include "stabcon/mrt.hpp"
#include "stabcon/mv_consensus.hpp"
#include "stabcon/rsm.hpp"
#include "stabcon/scenario.hpp"
#include "stabcon/simulator.hpp"
#include "stabcon/to_urb.hpp"
#include "stabcon/trace.hpp"
#include "stabcon/urb.hpp"
