// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "otfs/channel.hpp"
#include "otfs/config.hpp"
#include "otfs/equalizers.hpp"
#include "otfs/errors.hpp"
#include "otfs/frame.hpp"
#include "otfs/harness.hpp"
#include "otfs/random.hpp"
#include "otfs/transforms.hpp"
