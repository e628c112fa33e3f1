import { readFileSync } from "node:fs";
import { inflateSync } from "node:zlib";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

export const nodeInflate = async (data: Uint8Array): Promise<Uint8Array> =>
  new Uint8Array(inflateSync(data));

export function transcriptLines(): string[] {
  const here = dirname(fileURLToPath(import.meta.url));
  const raw = readFileSync(join(here, "fixtures", "transcript.jsonl"), "utf-8");
  return raw.split("\n").filter((line) => line.trim().length > 0);
}
