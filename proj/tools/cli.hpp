#pragma once

// Entry point behind main(), split out so tests can drive the tool
// in-process.
int cli_main(int argc, char** argv);
