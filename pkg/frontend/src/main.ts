import * as THREE from 'three';
import { OrbitControls } from 'three/addons/controls/OrbitControls.js';
import { meshesInlined, parseBundle } from './bundleSchema';
import type { SceneBundle, SelectionRecord } from './bundleSchema';
import { buildScene, clockHandAngleDeg, highlightTrajectory, STRUCTURE_COLORS } from './sceneBuild';
import type { BuiltScene } from './sceneBuild';
import { downloadSelection, fetchBundleJson, postSelection } from './transport';
import { STRUCTURE_KEYS, STRUCTURE_LABELS, SelectionLockedError, ViewerState } from './viewerState';
import './style.css';

// Page wiring. All numbers on screen come straight out of the bundle's
// readout strings; the 3D view is orientation support, not measurement.

let renderer: THREE.WebGLRenderer;
let camera: THREE.PerspectiveCamera;
let controls: OrbitControls;
let threeScene: THREE.Scene;
let built: BuiltScene | null = null;
let state: ViewerState | null = null;

const serverBase = new URLSearchParams(window.location.search).get('server')
    ?? window.location.origin;

const banner = document.getElementById('banner') as HTMLDivElement;
const panel = document.getElementById('panel') as HTMLDivElement;
const viewport = document.getElementById('viewport') as HTMLDivElement;

function showBanner(message: string, tone: 'error' | 'info'): void {
    banner.textContent = message;
    banner.className = `banner ${tone}`;
    banner.hidden = false;
}

function clearBanner(): void {
    banner.hidden = true;
}

function initThree(): void {
    threeScene = new THREE.Scene();
    threeScene.background = new THREE.Color(0x10141a);

    threeScene.add(new THREE.AmbientLight(0xffffff, 0.45));
    const key = new THREE.DirectionalLight(0xffffff, 0.9);
    key.position.set(12, 18, 24);
    threeScene.add(key);
    const fill = new THREE.DirectionalLight(0xffffff, 0.4);
    fill.position.set(-16, -6, -10);
    threeScene.add(fill);

    camera = new THREE.PerspectiveCamera(
        50, viewport.clientWidth / viewport.clientHeight, 0.1, 500,
    );
    renderer = new THREE.WebGLRenderer({ antialias: true });
    renderer.setSize(viewport.clientWidth, viewport.clientHeight);
    renderer.setPixelRatio(window.devicePixelRatio);
    viewport.appendChild(renderer.domElement);

    controls = new OrbitControls(camera, renderer.domElement);
    controls.enableDamping = true;

    window.addEventListener('resize', () => {
        camera.aspect = viewport.clientWidth / viewport.clientHeight;
        camera.updateProjectionMatrix();
        renderer.setSize(viewport.clientWidth, viewport.clientHeight);
    });

    const animate = () => {
        requestAnimationFrame(animate);
        controls.update();
        renderer.render(threeScene, camera);
    };
    animate();
}

function frameCamera(): void {
    if (built === null) {
        return;
    }
    const box = new THREE.Box3().setFromObject(built.root);
    const center = box.getCenter(new THREE.Vector3());
    const extent = box.getSize(new THREE.Vector3()).length();
    camera.position.copy(center.clone().add(new THREE.Vector3(1, 0.7, 1).normalize().multiplyScalar(extent * 1.2)));
    camera.near = extent / 100;
    camera.far = extent * 10;
    camera.updateProjectionMatrix();
    controls.target.copy(center);
    controls.update();
}

function drawClock(canvas: HTMLCanvasElement, text: string): void {
    const ctx = canvas.getContext('2d');
    if (ctx === null) {
        return;
    }
    const size = canvas.width;
    const mid = size / 2;
    const radius = mid - 3;
    ctx.clearRect(0, 0, size, size);
    ctx.strokeStyle = '#c9d4e0';
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.arc(mid, mid, radius, 0, 2 * Math.PI);
    ctx.stroke();
    for (let h = 0; h < 12; h++) {
        const angle = (h * Math.PI) / 6;
        const outer = radius;
        const inner = h % 3 === 0 ? radius - 6 : radius - 3;
        ctx.beginPath();
        ctx.moveTo(mid + inner * Math.sin(angle), mid - inner * Math.cos(angle));
        ctx.lineTo(mid + outer * Math.sin(angle), mid - outer * Math.cos(angle));
        ctx.stroke();
    }
    const hand = (clockHandAngleDeg(text) * Math.PI) / 180;
    ctx.strokeStyle = '#f1c40f';
    ctx.lineWidth = 2.5;
    ctx.beginPath();
    ctx.moveTo(mid, mid);
    ctx.lineTo(mid + (radius - 8) * Math.sin(hand), mid - (radius - 8) * Math.cos(hand));
    ctx.stroke();
}

const READOUT_ROWS: Array<[label: string, key: keyof SceneBundle['plans'][number]['readouts']]> = [
    ['Entry site', 'entry_site'],
    ['Facial nerve clearance', 'clearance_facial_nerve'],
    ['Chorda tympani clearance', 'clearance_chorda'],
    ['Ossicles clearance', 'clearance_ossicles'],
    ['Trajectory tilt vs RW plane', 'tilt'],
    ['Curl direction (clock)', 'curl_clock'],
    ['Extension direction (clock)', 'entry_clock'],
    ['Planned base depth', 'base_depth'],
    ['Over-insert to', 'overinsert_depth'],
    ['Predicted insertion depth', 'predicted_aid'],
    ['Predicted modiolar distance', 'predicted_mmd'],
];

function renderSidebar(): void {
    if (state === null) {
        return;
    }
    panel.innerHTML = '';

    const title = document.createElement('h1');
    title.textContent = `Case ${state.bundle.case_id}`;
    panel.appendChild(title);

    const planHeading = document.createElement('h2');
    planHeading.textContent = 'Candidate plans';
    panel.appendChild(planHeading);

    const planList = document.createElement('div');
    planList.className = 'plan-list';
    state.planLabels().forEach((label, index) => {
        const button = document.createElement('button');
        button.type = 'button';
        button.textContent = label;
        button.className = index === state!.activePlanIndex ? 'plan active' : 'plan';
        button.addEventListener('click', () => {
            state!.setActivePlan(index);
            if (built !== null) {
                highlightTrajectory(built.trajectories, index);
            }
            renderSidebar();   // camera untouched: switching plans only redraws the panel
        });
        planList.appendChild(button);
    });
    panel.appendChild(planList);

    const readouts = state.readouts();
    const table = document.createElement('table');
    table.className = 'readouts';
    for (const [label, key] of READOUT_ROWS) {
        const row = document.createElement('tr');
        const name = document.createElement('td');
        name.textContent = label;
        const value = document.createElement('td');
        value.textContent = readouts[key];
        row.appendChild(name);
        row.appendChild(value);
        table.appendChild(row);
    }
    panel.appendChild(table);

    const clocks = document.createElement('div');
    clocks.className = 'clocks';
    for (const [caption, text] of [['Curl', readouts.curl_clock], ['Entry', readouts.entry_clock]] as const) {
        const holder = document.createElement('figure');
        const canvas = document.createElement('canvas');
        canvas.width = 72;
        canvas.height = 72;
        drawClock(canvas, text);
        const legend = document.createElement('figcaption');
        legend.textContent = `${caption} ${text}`;
        holder.appendChild(canvas);
        holder.appendChild(legend);
        clocks.appendChild(holder);
    }
    panel.appendChild(clocks);

    const sheet = document.createElement('details');
    const summary = document.createElement('summary');
    summary.textContent = 'Full plan sheet';
    const pre = document.createElement('pre');
    pre.textContent = state.activePlan.plan_text;
    sheet.appendChild(summary);
    sheet.appendChild(pre);
    panel.appendChild(sheet);

    const toggleHeading = document.createElement('h2');
    toggleHeading.textContent = 'Structures';
    panel.appendChild(toggleHeading);

    const toggles = document.createElement('div');
    toggles.className = 'toggles';
    for (const structureKey of STRUCTURE_KEYS) {
        const row = document.createElement('label');
        const checkbox = document.createElement('input');
        checkbox.type = 'checkbox';
        checkbox.checked = state.isShown(structureKey);
        checkbox.addEventListener('change', () => {
            state!.setShown(structureKey, checkbox.checked);
            if (built !== null) {
                built.structures[structureKey].visible = checkbox.checked;
            }
        });
        const swatch = document.createElement('span');
        swatch.className = 'swatch';
        swatch.style.background = `#${STRUCTURE_COLORS[structureKey].toString(16).padStart(6, '0')}`;
        row.appendChild(checkbox);
        row.appendChild(swatch);
        row.appendChild(document.createTextNode(STRUCTURE_LABELS[structureKey]));
        toggles.appendChild(row);
    }
    panel.appendChild(toggles);

    const actions = document.createElement('div');
    actions.className = 'actions';
    const submit = document.createElement('button');
    submit.type = 'button';
    submit.textContent = 'Submit selection';
    submit.disabled = state.selectionLocked;
    submit.addEventListener('click', () => { void submitActivePlan(); });
    const download = document.createElement('button');
    download.type = 'button';
    download.textContent = 'Download record';
    download.disabled = state.selectionLocked && state.selectedKind === null;
    download.addEventListener('click', () => { void saveActivePlan(); });
    actions.appendChild(submit);
    actions.appendChild(download);
    panel.appendChild(actions);

    const status = document.createElement('p');
    status.className = 'status';
    const phase = state.submitPhase;
    if (phase.kind === 'recorded') {
        status.textContent = `Selection recorded: ${phase.record.selected_entry_kind}`;
    } else if (phase.kind === 'failed') {
        status.textContent = `Submission failed (${phase.message}); press submit to retry.`;
    } else if (phase.kind === 'rejected') {
        status.textContent = `Submission refused: ${phase.message}`;
    } else if (phase.kind === 'in_flight') {
        status.textContent = 'Submitting...';
    } else {
        status.textContent = 'No selection submitted yet.';
    }
    panel.appendChild(status);
}

async function submitActivePlan(): Promise<void> {
    if (state === null) {
        return;
    }
    try {
        await state.submitSelection((record: SelectionRecord) => postSelection(serverBase, record));
    } catch (error) {
        if (!(error instanceof SelectionLockedError)) {
            throw error;
        }
    }
    renderSidebar();
}

async function saveActivePlan(): Promise<void> {
    if (state === null) {
        return;
    }
    const phase = state.submitPhase;
    if (phase.kind === 'recorded') {
        downloadSelection(phase.record);
        return;
    }
    try {
        await state.submitSelection(async (record) => {
            downloadSelection(record);
            return { kind: 'recorded' as const };
        });
    } catch (error) {
        if (!(error instanceof SelectionLockedError)) {
            throw error;
        }
    }
    renderSidebar();
}

function adoptBundle(data: unknown): void {
    const outcome = parseBundle(data);
    if (!outcome.ok) {
        showBanner(outcome.message, 'error');
        return;
    }
    if (!meshesInlined(outcome.bundle)) {
        showBanner('bundle references mesh files; serve it with the planner or re-export inlined', 'error');
        return;
    }
    clearBanner();
    state = new ViewerState(outcome.bundle);
    if (built !== null) {
        threeScene.remove(built.root);
    }
    built = buildScene(outcome.bundle);
    threeScene.add(built.root);
    highlightTrajectory(built.trajectories, state.activePlanIndex);
    frameCamera();
    renderSidebar();
}

function wireFilePicker(): void {
    const picker = document.getElementById('bundle-file') as HTMLInputElement;
    picker.addEventListener('change', () => {
        const file = picker.files?.[0];
        if (file === undefined) {
            return;
        }
        file.text().then((text) => {
            let data: unknown;
            try {
                data = JSON.parse(text);
            } catch (error) {
                showBanner(`bundle rejected: not JSON (${String(error)})`, 'error');
                return;
            }
            adoptBundle(data);
        }, (error) => showBanner(`could not read file: ${String(error)}`, 'error'));
    });
}

async function boot(): Promise<void> {
    initThree();
    wireFilePicker();
    try {
        const data = await fetchBundleJson(serverBase);
        adoptBundle(data);
    } catch {
        showBanner('No plan server reachable; open a bundle file below.', 'info');
    }
}

void boot();
