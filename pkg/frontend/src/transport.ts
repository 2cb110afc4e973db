import type { SelectionRecord } from './bundleSchema';
import type { SubmitResult } from './viewerState';

// Talking to the planner's little HTTP bridge (GET /bundle, one-shot
// POST /selection) and the offline fallback of saving the selection
// record as a file the planner CLI reads back.

export class TransportError extends Error {
    constructor(message: string) {
        super(message);
        this.name = 'TransportError';
    }
}

async function errorMessage(response: Response): Promise<string> {
    try {
        const body = await response.json();
        if (body && typeof body.error === 'string') {
            return body.error;
        }
    } catch {
        // non-JSON error body; fall through to the status line
    }
    return `server answered ${response.status}`;
}

/** Fetch the bundle JSON (meshes inlined by the server). */
export async function fetchBundleJson(baseUrl: string): Promise<unknown> {
    let response: Response;
    try {
        response = await fetch(new URL('/bundle', baseUrl));
    } catch (error) {
        throw new TransportError(`could not reach ${baseUrl}: ${String(error)}`);
    }
    if (!response.ok) {
        throw new TransportError(await errorMessage(response));
    }
    return response.json();
}

/**
 * Post one selection record. Resolves with the server's verdict for
 * expected outcomes (recorded, duplicate, invalid); throws on transport
 * failure so the caller can offer a retry.
 */
export async function postSelection(baseUrl: string, record: SelectionRecord): Promise<SubmitResult> {
    let response: Response;
    try {
        response = await fetch(new URL('/selection', baseUrl), {
            method: 'POST',
            headers: { 'Content-Type': 'application/json' },
            body: JSON.stringify(record),
        });
    } catch (error) {
        throw new TransportError(`could not reach ${baseUrl}: ${String(error)}`);
    }
    if (response.status === 201) {
        return { kind: 'recorded' };
    }
    if (response.status === 409) {
        return { kind: 'duplicate', message: await errorMessage(response) };
    }
    if (response.status === 400) {
        return { kind: 'invalid', message: await errorMessage(response) };
    }
    throw new TransportError(await errorMessage(response));
}

export function selectionFileName(record: SelectionRecord): string {
    return `selection_${record.case_id}.json`;
}

/** Serialized exactly as the planner writes its own records. */
export function selectionFileContents(record: SelectionRecord): string {
    const ordered: SelectionRecord = {
        case_id: record.case_id,
        selected_entry_kind: record.selected_entry_kind,
        timestamp: record.timestamp,
    };
    return `${JSON.stringify(ordered, null, 1)}\n`;
}

/** Offline path: hand the record to the browser as a download. */
export function downloadSelection(record: SelectionRecord): void {
    const blob = new Blob([selectionFileContents(record)], { type: 'application/json' });
    const url = URL.createObjectURL(blob);
    const anchor = document.createElement('a');
    anchor.href = url;
    anchor.download = selectionFileName(record);
    anchor.click();
    URL.revokeObjectURL(url);
}
