#!/usr/bin/env node
import { main } from "./train.js";

main(process.argv.slice(2));
