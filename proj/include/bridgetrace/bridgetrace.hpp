#pragma once

#include <bridgetrace/analytics.hpp>
#include <bridgetrace/bridge_spec.hpp>
#include <bridgetrace/cli.hpp>
#include <bridgetrace/codec.hpp>
#include <bridgetrace/decode.hpp>
#include <bridgetrace/ingest.hpp>
#include <bridgetrace/ingest_http.hpp>
#include <bridgetrace/match.hpp>
#include <bridgetrace/store.hpp>
#include <bridgetrace/traffic_sim.hpp>
#include <bridgetrace/tuner.hpp>
#include <bridgetrace/types.hpp>
